//! Operator family: `N` coupled channels with cell-wise random symmetric
//! potentials on unit cells `[n, n+1)`.
//!
//! Disorder is generated by a counter-based scheme: the cell at index `n` is
//! a pure function of `(seed, n)`, so realizations are independent of the
//! order (or thread) in which cells are visited.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, op_norm};

/// Name of the two-coupled-strings Anderson–Bernoulli preset in model files.
pub const MODEL2_PRESET: &str = "two-coupled-strings-bernoulli";

const SYMMETRY_TOL: f64 = 1e-14;
const CELL_STREAM: u64 = 0x6365_6c6c; // "cell"

/// Deterministic RNG for `(seed, purpose, index)`.
///
/// Used everywhere a task needs its own reproducible random stream.
pub fn stream_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

/// Derives an independent 64-bit seed for subtask `index`.
pub fn derive_seed(seed: u64, purpose: u64, index: u64) -> u64 {
    stream_rng(seed, purpose, index).next_u64()
}

/// One constant piece of a cell potential.
#[derive(Clone, Debug)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub matrix: DMatrix<f64>,
    /// Eigenvalues of `matrix`, ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors (columns) matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl Piece {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

/// Piecewise-constant `N x N` symmetric potential on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct CellPotential {
    channels: usize,
    pieces: Vec<Piece>,
}

impl CellPotential {
    /// Builds a cell from `(breakpoint, matrix)` pairs.
    ///
    /// Piece `i` spans `[breakpoint_i, breakpoint_{i+1})`; the first breakpoint
    /// must be 0 and the last piece ends at 1.
    pub fn new(pieces: Vec<(f64, DMatrix<f64>)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Domain("cell potential needs at least one piece".into()));
        }
        if pieces[0].0 != 0.0 {
            return Err(Error::Domain("first breakpoint must be 0".into()));
        }
        let channels = pieces[0].1.nrows();
        if channels == 0 {
            return Err(Error::Domain("empty potential matrix".into()));
        }
        let mut out = Vec::with_capacity(pieces.len());
        for (i, (start, m)) in pieces.iter().enumerate() {
            let end = pieces.get(i + 1).map_or(1.0, |p| p.0);
            if !(end > *start) || *start < 0.0 || end > 1.0 {
                return Err(Error::Domain(format!(
                    "breakpoints must increase strictly inside [0, 1] (piece {i}: {start}..{end})"
                )));
            }
            if m.nrows() != channels || m.ncols() != channels {
                return Err(Error::Domain(format!("piece {i} is not {channels}x{channels}")));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("piece {i} has non-finite entries")));
            }
            let asym = asymmetry(m);
            if asym > SYMMETRY_TOL {
                return Err(Error::Domain(format!("piece {i} is not symmetric (deviation {asym:e})")));
            }
            let matrix = (m + m.transpose()) * 0.5;
            let eig = matrix.clone().symmetric_eigen();
            let (eigenvalues, eigenvectors) = sorted_eigen(eig.eigenvalues, eig.eigenvectors);
            out.push(Piece { start: *start, end, matrix, eigenvalues, eigenvectors });
        }
        Ok(Self { channels, pieces: out })
    }

    /// A cell with one constant piece.
    pub fn constant(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![(0.0, matrix)])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Piece containing local coordinate `x` (clamped to `[0, 1]`).
    pub fn piece_at(&self, x: f64) -> &Piece {
        let x = x.clamp(0.0, 1.0);
        self.pieces.iter().find(|p| x < p.end).unwrap_or_else(|| self.pieces.last().expect("non-empty"))
    }

    /// Potential value at local coordinate `x`.
    pub fn value_at(&self, x: f64) -> &DMatrix<f64> {
        &self.piece_at(x).matrix
    }

    /// `∫_a^b V(x) dx` for `0 <= a <= b <= 1`.
    pub fn integral(&self, a: f64, b: f64) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.channels, self.channels);
        for p in &self.pieces {
            let lo = a.max(p.start);
            let hi = b.min(p.end);
            if hi > lo {
                acc += &p.matrix * (hi - lo);
            }
        }
        acc
    }

    /// `sup_x ||V(x)||` over the cell.
    pub fn sup_norm(&self) -> f64 {
        self.pieces.iter().map(|p| p.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()))).fold(0.0, f64::max)
    }
}

fn sorted_eigen(values: DVector<f64>, vectors: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let vals = DVector::from_iterator(values.len(), order.iter().map(|&i| values[i]));
    let vecs = DMatrix::from_columns(&order.iter().map(|&i| vectors.column(i)).collect::<Vec<_>>());
    (vals, vecs)
}

/// Law of one random diagonal entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Distribution {
    Dirac {
        value: f64,
    },
    /// `v1` with probability `p`, otherwise `v0`.
    Bernoulli {
        p: f64,
        v0: f64,
        v1: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    /// Atoms as `[value, probability]` pairs.
    Finite {
        atoms: Vec<(f64, f64)>,
    },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self {
            Distribution::Dirac { value } if !value.is_finite() => bad("dirac value must be finite".into()),
            Distribution::Bernoulli { p, v0, v1 } => {
                if !(0.0..=1.0).contains(p) {
                    bad(format!("bernoulli probability {p} outside [0, 1]"))
                } else if !v0.is_finite() || !v1.is_finite() {
                    bad("bernoulli values must be finite".into())
                } else {
                    Ok(())
                }
            }
            Distribution::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a <= b) {
                    bad(format!("uniform bounds must satisfy a <= b (got {a}, {b})"))
                } else {
                    Ok(())
                }
            }
            Distribution::Finite { atoms } => {
                if atoms.is_empty() {
                    return bad("finite distribution has no atoms".into());
                }
                if atoms.iter().any(|&(v, p)| !v.is_finite() || !(0.0..=1.0).contains(&p)) {
                    return bad("finite distribution atoms need finite values and probabilities in [0, 1]".into());
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("finite distribution probabilities sum to {total}, not 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Largest `|v|` over the support.
    pub fn max_abs(&self) -> f64 {
        match self {
            Distribution::Dirac { value } => value.abs(),
            Distribution::Bernoulli { v0, v1, .. } => v0.abs().max(v1.abs()),
            Distribution::Uniform { a, b } => a.abs().max(b.abs()),
            Distribution::Finite { atoms } => atoms.iter().fold(0.0, |m, a| m.max(a.0.abs())),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Distribution::Dirac { value } => *value,
            Distribution::Bernoulli { p, v0, v1 } => {
                if rng.random::<f64>() < *p {
                    *v1
                } else {
                    *v0
                }
            }
            Distribution::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            Distribution::Finite { atoms } => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                atoms.last().map(|a| a.0).unwrap_or(0.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomEntry {
    pub channel: usize,
    pub dist: Distribution,
}

/// Deterministic coupling plus i.i.d. random diagonal entries per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderSpec {
    pub channels: usize,
    pub base_coupling: DMatrix<f64>,
    pub random_entries: Vec<RandomEntry>,
    /// Declared bound on `||V||`; defaults to [`DisorderSpec::norm_bound`].
    pub v_max: Option<f64>,
}

/// On-disk model description.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_coupling: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_entries: Option<Vec<RandomEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
}

/// Two coupled strings with Bernoulli(1/2) disorder on `{0, 1}`.
pub fn model2_preset() -> DisorderSpec {
    model2_with(Distribution::Bernoulli { p: 0.5, v0: 0.0, v1: 1.0 })
}

/// Two coupled strings with the diagonal law replaced by `dist`.
pub fn model2_with(dist: Distribution) -> DisorderSpec {
    DisorderSpec {
        channels: 2,
        base_coupling: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        random_entries: vec![RandomEntry { channel: 0, dist: dist.clone() }, RandomEntry { channel: 1, dist }],
        v_max: None,
    }
}

impl DisorderSpec {
    /// Scalar (`N = 1`) model with constant potential `c`.
    pub fn constant_scalar(c: f64) -> Self {
        Self { channels: 1, base_coupling: DMatrix::from_element(1, 1, c), random_entries: Vec::new(), v_max: None }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.channels;
        if n == 0 {
            return Err(Error::Config("channel count must be at least 1".into()));
        }
        if self.base_coupling.nrows() != n || self.base_coupling.ncols() != n {
            return Err(Error::Config(format!("base_coupling must be {n}x{n}")));
        }
        if self.base_coupling.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("base_coupling has non-finite entries".into()));
        }
        if asymmetry(&self.base_coupling) > SYMMETRY_TOL {
            return Err(Error::Config("base_coupling must be symmetric".into()));
        }
        for e in &self.random_entries {
            if e.channel >= n {
                return Err(Error::Config(format!("random entry channel {} out of range 0..{n}", e.channel)));
            }
            e.dist.validate()?;
        }
        if let Some(v) = self.v_max {
            let bound = self.norm_bound();
            if !(v.is_finite() && v >= bound - 1e-12) {
                return Err(Error::Config(format!("declared v_max {v} is below the attainable bound {bound}")));
            }
        }
        Ok(())
    }

    /// `||base|| + max_i Σ_{entries on i} max|value|`, an upper bound on `||V||`.
    pub fn norm_bound(&self) -> f64 {
        let mut per_channel = vec![0.0; self.channels];
        for e in &self.random_entries {
            if e.channel < self.channels {
                per_channel[e.channel] += e.dist.max_abs();
            }
        }
        op_norm(&self.base_coupling) + per_channel.into_iter().fold(0.0, f64::max)
    }

    /// Declared `V_max`, or the computed norm bound.
    pub fn v_max(&self) -> f64 {
        self.v_max.unwrap_or_else(|| self.norm_bound())
    }

    pub fn from_model_file(file: ModelFile) -> Result<Self> {
        if let Some(preset) = &file.preset {
            return match preset.as_str() {
                MODEL2_PRESET => {
                    let mut spec = model2_preset();
                    spec.v_max = file.v_max;
                    spec.validate()?;
                    Ok(spec)
                }
                other => Err(Error::Config(format!("unknown preset '{other}'"))),
            };
        }
        let channels = file.channels.ok_or_else(|| Error::Config("model file needs 'channels' or 'preset'".into()))?;
        let rows = file.base_coupling.unwrap_or_else(|| vec![vec![0.0; channels]; channels]);
        if rows.len() != channels || rows.iter().any(|r| r.len() != channels) {
            return Err(Error::Config(format!("base_coupling must be {channels}x{channels}")));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let spec = Self {
            channels,
            base_coupling: DMatrix::from_row_slice(channels, channels, &flat),
            random_entries: file.random_entries.unwrap_or_default(),
            v_max: file.v_max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_model_file(&self) -> ModelFile {
        let rows =
            (0..self.channels).map(|i| (0..self.channels).map(|j| self.base_coupling[(i, j)]).collect()).collect();
        ModelFile {
            channels: Some(self.channels),
            base_coupling: Some(rows),
            random_entries: Some(self.random_entries.clone()),
            preset: None,
            v_max: self.v_max,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid model JSON: {e}")))?;
        Self::from_model_file(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_model_file()).expect("model serializes")
    }

    /// True when every random entry is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.random_entries.iter().all(|e| matches!(e.dist, Distribution::Dirac { .. }))
    }
}

/// Samples the potential of cell `n` for disorder `seed`.
pub fn sample_cell(spec: &DisorderSpec, seed: u64, n: i64) -> Result<CellPotential> {
    spec.validate()?;
    let cell = sample_unchecked(spec, seed, n);
    let norm = cell.sup_norm();
    if let Some(v) = spec.v_max {
        if norm > v * (1.0 + 1e-12) {
            return Err(Error::Config(format!("cell {n} has norm {norm} above declared v_max {v}")));
        }
    }
    Ok(cell)
}

fn sample_unchecked(spec: &DisorderSpec, seed: u64, n: i64) -> CellPotential {
    let mut m = spec.base_coupling.clone();
    if !spec.random_entries.is_empty() {
        let mut rng = stream_rng(seed, CELL_STREAM, n as u64);
        for e in &spec.random_entries {
            m[(e.channel, e.channel)] += e.dist.sample(&mut rng);
        }
    }
    CellPotential::constant(m).expect("validated spec yields a valid cell")
}

/// A disorder realization: `spec` together with a seed. Cells are generated
/// on demand and never cached, so this is cheap to copy and share.
#[derive(Clone, Copy, Debug)]
pub struct Realization<'a> {
    spec: &'a DisorderSpec,
    seed: u64,
}

impl<'a> Realization<'a> {
    pub fn new(spec: &'a DisorderSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, seed })
    }

    pub fn spec(&self) -> &'a DisorderSpec {
        self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Potential of cell `n`, covering `[n, n+1)`.
    pub fn cell(&self, n: i64) -> CellPotential {
        sample_unchecked(self.spec, self.seed, n)
    }

    /// `∫_a^b V(x) dx` over an arbitrary interval of the real line.
    pub fn integral(&self, a: f64, b: f64) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.spec.channels, self.spec.channels);
        if b <= a {
            return acc;
        }
        let first = a.floor() as i64;
        let last = (b.ceil() as i64).max(first + 1);
        for n in first..last {
            let lo = (a - n as f64).max(0.0);
            let hi = (b - n as f64).min(1.0);
            if hi > lo {
                acc += self.cell(n).integral(lo, hi);
            }
        }
        acc
    }
}
