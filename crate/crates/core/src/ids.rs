//! Integrated density of states.
//!
//! The finite-volume IDS counts eigenvalues of the box operator
//! `-d²/dx² ⊗ I_N + V_ω` on `(-L, L)`, discretized by second-order central
//! differences. Counting uses Sylvester's law of inertia: the number of
//! negative pivots of an `LDLᵀ` factorization of `H - E` equals the number
//! of eigenvalues below `E`. The matrix is banded with bandwidth `N`, so each
//! count is `O(L/h · N²)`.
//!
//! The Laplace transform of the IDS measure is also estimated independently
//! by a Feynman–Kac average over Brownian bridges (see
//! [`feynman_kac_laplace`]).

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_seed, stream_rng, CellPotential, DisorderSpec, Realization};
use crate::par;
use crate::stats::mean_se;

const FK_DISORDER: u64 = 0x666b_6469; // "fkdi"
const FK_PATH: u64 = 0x666b_7061; // "fkpa"
/// Energy shift applied when an `LDLᵀ` pivot vanishes.
pub const BREAKDOWN_SHIFT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Neumann,
}

impl Boundary {
    pub fn as_str(&self) -> &'static str {
        match self {
            Boundary::Dirichlet => "dirichlet",
            Boundary::Neumann => "neumann",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(Boundary::Dirichlet),
            "neumann" => Ok(Boundary::Neumann),
            other => Err(Error::Config(format!("unknown boundary condition '{other}'"))),
        }
    }
}

/// Result of one inertia count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxCount {
    pub count: usize,
    /// Energy actually factorized (differs from the request after a breakdown).
    pub energy: f64,
    pub shifted: bool,
}

/// Discretized box operator for one realization.
///
/// Dirichlet uses the vertex grid `x_j = -L + j h`, `0 < j < 2L/h`; Neumann
/// uses the cell-centred grid `x_j = -L + (j + ½) h` with reflecting ghost
/// nodes. Each node carries the average of `V` over `[x - h/2, x + h/2]`.
#[derive(Clone, Debug)]
pub struct BoxOperator {
    channels: usize,
    mesh: f64,
    boundary: Boundary,
    /// Per node, row-major `N x N` block of `V` plus the kinetic diagonal.
    blocks: Vec<f64>,
    scale: f64,
}

fn validate_box(box_length: usize, mesh: f64) -> Result<usize> {
    if box_length < 1 {
        return Err(Error::Domain("box length must be at least 1 cell".into()));
    }
    if !(mesh > 0.0 && mesh <= 1.0) {
        return Err(Error::Domain(format!("mesh {mesh} must lie in (0, 1]")));
    }
    let per_cell = (1.0 / mesh).round();
    if (per_cell * mesh - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("mesh {mesh} does not divide the unit cell evenly")));
    }
    Ok(per_cell as usize)
}

impl BoxOperator {
    pub fn new(spec: &DisorderSpec, seed: u64, box_length: usize, mesh: f64, boundary: Boundary) -> Result<Self> {
        let per_cell = validate_box(box_length, mesh)?;
        let realization = Realization::new(spec, seed)?;
        let n = spec.channels;
        let h = 1.0 / per_cell as f64;
        let intervals = 2 * box_length * per_cell;
        let left = -(box_length as f64);
        let inv_h2 = 1.0 / (h * h);
        let (nodes, centred) = match boundary {
            Boundary::Dirichlet => (intervals - 1, false),
            Boundary::Neumann => (intervals, true),
        };
        let cells: HashMap<i64, CellPotential> =
            (-(box_length as i64) - 1..=box_length as i64).map(|k| (k, realization.cell(k))).collect();
        let average = |a: f64, b: f64| {
            let mut acc = DMatrix::<f64>::zeros(n, n);
            let first = a.floor() as i64;
            let last = b.ceil() as i64;
            for k in first..last.max(first + 1) {
                let lo = (a - k as f64).max(0.0);
                let hi = (b - k as f64).min(1.0);
                if hi > lo {
                    acc += cells[&k].integral(lo, hi);
                }
            }
            acc / (b - a)
        };
        let mut blocks = Vec::with_capacity(nodes * n * n);
        for j in 0..nodes {
            let x = if centred { left + (j as f64 + 0.5) * h } else { left + (j as f64 + 1.0) * h };
            let lo = (x - 0.5 * h).max(left);
            let hi = (x + 0.5 * h).min(-left);
            let v = average(lo, hi);
            let kinetic = if centred && (j == 0 || j == nodes - 1) { inv_h2 } else { 2.0 * inv_h2 };
            for r in 0..n {
                for c in 0..n {
                    blocks.push(v[(r, c)] + if r == c { kinetic } else { 0.0 });
                }
            }
        }
        Ok(Self { channels: n, mesh: h, boundary, blocks, scale: 4.0 * inv_h2 + spec.v_max() })
    }

    pub fn dimension(&self) -> usize {
        self.blocks.len() / self.channels
    }

    pub fn nodes(&self) -> usize {
        self.blocks.len() / (self.channels * self.channels)
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    fn entry(&self, i: usize, k: usize) -> f64 {
        // k <= i, i - k <= N
        let n = self.channels;
        let (ji, ci) = (i / n, i % n);
        let (jk, ck) = (k / n, k % n);
        if ji == jk {
            self.blocks[ji * n * n + ci * n + ck]
        } else if ji == jk + 1 && ci == ck {
            -1.0 / (self.mesh * self.mesh)
        } else {
            0.0
        }
    }

    /// Negative pivots of `H - E`, or `None` on a vanishing pivot.
    fn inertia(&self, energy: f64) -> Option<usize> {
        let bw = self.channels;
        let dim = self.dimension();
        let tiny = f64::EPSILON * (self.scale + energy.abs());
        let mut d = vec![0.0; dim];
        // l[i * bw + (i - k - 1)] = L[i][k] for i - bw <= k < i
        let mut l = vec![0.0; dim * bw];
        let mut negatives = 0;
        for i in 0..dim {
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                let mut a = self.entry(i, k);
                for m in lo.max(k.saturating_sub(bw))..k {
                    a -= l[i * bw + (i - m - 1)] * d[m] * l[k * bw + (k - m - 1)];
                }
                l[i * bw + (i - k - 1)] = a / d[k];
            }
            let mut pivot = self.entry(i, i) - energy;
            for m in lo..i {
                let lim = l[i * bw + (i - m - 1)];
                pivot -= lim * lim * d[m];
            }
            if pivot.abs() <= tiny || !pivot.is_finite() {
                return None;
            }
            if pivot < 0.0 {
                negatives += 1;
            }
            d[i] = pivot;
        }
        Some(negatives)
    }

    /// Number of eigenvalues below `energy`, retrying once at
    /// `energy + BREAKDOWN_SHIFT` if a pivot vanishes.
    pub fn count_below(&self, energy: f64) -> Result<BoxCount> {
        if let Some(count) = self.inertia(energy) {
            return Ok(BoxCount { count, energy, shifted: false });
        }
        let shifted = energy + BREAKDOWN_SHIFT;
        self.inertia(shifted)
            .map(|count| BoxCount { count, energy: shifted, shifted: true })
            .ok_or_else(|| Error::Numerical(format!("LDLᵀ breakdown at E = {energy} and after shifting")))
    }

    /// Dense matrix, for small boxes and cross-checks.
    pub fn dense(&self) -> DMatrix<f64> {
        let dim = self.dimension();
        let bw = self.channels;
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for k in i.saturating_sub(bw)..=i {
                let v = self.entry(i, k);
                m[(i, k)] = v;
                m[(k, i)] = v;
            }
        }
        m
    }
}

/// `#{λ ≤ E}` for the box `(-L, L)` of realization `seed`.
pub fn finite_box_count(
    spec: &DisorderSpec,
    seed: u64,
    box_length: usize,
    mesh: f64,
    energy: f64,
    boundary: Boundary,
) -> Result<BoxCount> {
    BoxOperator::new(spec, seed, box_length, mesh, boundary)?.count_below(energy)
}

/// Finite-volume IDS on an energy grid, normalized by `|D| = 2L`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdsTable {
    pub energies: Vec<f64>,
    pub counts_per_volume: Vec<f64>,
    pub box_length: usize,
    pub mesh: f64,
    pub boundary: Boundary,
    pub seed: u64,
    /// Channel count; sets the free high-energy tail `N dE / (2π √E)`.
    pub channels: usize,
    /// Grid energies at which a pivot breakdown forced a shift.
    #[serde(default)]
    pub shifted: Vec<f64>,
}

impl IdsTable {
    /// A table from given values (e.g. synthetic measures or files).
    pub fn from_values(energies: Vec<f64>, counts_per_volume: Vec<f64>, channels: usize) -> Result<Self> {
        if energies.len() != counts_per_volume.len() || energies.len() < 2 {
            return Err(Error::Domain("IDS table needs matching energy/value columns of length >= 2".into()));
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("IDS energies must be strictly increasing".into()));
        }
        Ok(Self {
            energies,
            counts_per_volume,
            box_length: 0,
            mesh: 0.0,
            boundary: Boundary::Dirichlet,
            seed: 0,
            channels,
            shifted: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Step-function value: the entry at the largest grid energy `<= e`.
    pub fn value_at(&self, e: f64) -> f64 {
        match self.energies.partition_point(|&x| x <= e) {
            0 => 0.0,
            k => self.counts_per_volume[k - 1],
        }
    }

    /// Uniform grid spacing (mean spacing for non-uniform grids).
    pub fn step(&self) -> f64 {
        (self.energies[self.len() - 1] - self.energies[0]) / (self.len() - 1) as f64
    }
}

pub fn ids_table(
    spec: &DisorderSpec,
    seed: u64,
    box_length: usize,
    mesh: f64,
    energies: &[f64],
    boundary: Boundary,
) -> Result<IdsTable> {
    if energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("energy grid must be strictly increasing".into()));
    }
    let op = BoxOperator::new(spec, seed, box_length, mesh, boundary)?;
    let counts: Vec<BoxCount> = par::map_slice(energies, |&e| op.count_below(e)).into_iter().collect::<Result<_>>()?;
    let volume = 2.0 * box_length as f64;
    Ok(IdsTable {
        energies: energies.to_vec(),
        counts_per_volume: counts.iter().map(|c| c.count as f64 / volume).collect(),
        box_length,
        mesh: op.mesh,
        boundary,
        seed,
        channels: spec.channels,
        shifted: counts.iter().filter(|c| c.shifted).map(|c| c.energy).collect(),
    })
}

/// `∫ e^{-tE} dN(E)` from a table.
///
/// Mass below the first grid energy sits at that energy; each increment
/// `N(E_k) - N(E_{k-1})` is placed at the midpoint of its grid step. Beyond
/// the last grid energy `E_K` the free asymptotics `dN = N dE / (2π √E)`
/// contribute `N/(2π) √(π/t) erfc(√(t E_K))`.
pub fn laplace_of_ids(table: &IdsTable, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("Laplace variable t = {t} must be positive")));
    }
    let e = &table.energies;
    let n = &table.counts_per_volume;
    let mut acc = n[0] * (-t * e[0]).exp();
    for k in 1..e.len() {
        let mid = 0.5 * (e[k - 1] + e[k]);
        acc += (n[k] - n[k - 1]) * (-t * mid).exp();
    }
    Ok(acc + free_laplace_tail(table.channels, e[e.len() - 1], t))
}

/// `∫_{e0}^∞ e^{-tE} channels/(2π√E) dE`.
pub fn free_laplace_tail(channels: usize, e0: f64, t: f64) -> f64 {
    if channels == 0 {
        return 0.0;
    }
    let e0 = e0.max(0.0);
    channels as f64 / (2.0 * PI) * (PI / t).sqrt() * statrs::function::erf::erfc((t * e0).sqrt())
}

/// Monte-Carlo estimate of the Laplace transform of the IDS measure.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FeynmanKacEstimate {
    pub t: f64,
    pub value: f64,
    /// Zero when the integrand is deterministic (constant potential).
    pub mc_standard_error: f64,
    pub paths: usize,
    pub time_step: f64,
}

/// Coincident-point heat kernel of `-d²/dx²`.
pub fn heat_kernel_diagonal(t: f64) -> f64 {
    (4.0 * PI * t).powf(-0.5)
}

/// `𝔼 Tr exp_ord(-∫₀ᵗ V(w(s)) ds)` over bridges from 0 to 0, times `(4πt)^{-1/2}`.
///
/// Bridges have variance `2s` (generator `d²/dx²`, matching the operator);
/// each path draws its own disorder realization. The time-ordered exponential
/// is the product of `exp(-Δs V(w(s_j)))` at left endpoints of a uniform grid.
pub fn feynman_kac_laplace(
    spec: &DisorderSpec,
    t: f64,
    n_paths: usize,
    time_step: f64,
    seed: u64,
) -> Result<FeynmanKacEstimate> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    if !(time_step > 0.0 && time_step <= t / 10.0 + 1e-15) {
        return Err(Error::Domain(format!("time step {time_step} must lie in (0, t/10]")));
    }
    if n_paths < 2 {
        return Err(Error::Domain("need at least 2 paths".into()));
    }
    spec.validate()?;
    let steps = (t / time_step).round().max(10.0) as usize;
    let ds = t / steps as f64;
    let traces = par::map_range(n_paths, |i| bridge_trace(spec, t, steps, ds, seed, i as u64));
    if let Some(bad) = traces.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("path {bad} produced a non-finite trace (time step too coarse?)")));
    }
    let (mean, se) = mean_se(&traces);
    let k = heat_kernel_diagonal(t);
    Ok(FeynmanKacEstimate { t, value: mean * k, mc_standard_error: se * k, paths: n_paths, time_step: ds })
}

fn bridge_trace(spec: &DisorderSpec, t: f64, steps: usize, ds: f64, seed: u64, path: u64) -> f64 {
    let realization = Realization::new(spec, derive_seed(seed, FK_DISORDER, path)).expect("validated");
    let mut rng = stream_rng(seed, FK_PATH, path);
    let n = spec.channels;
    let mut cells: HashMap<i64, CellPotential> = HashMap::new();
    let mut product = DMatrix::<f64>::identity(n, n);
    let mut x = 0.0_f64;
    for j in 0..steps {
        let k = x.floor() as i64;
        let cell = cells.entry(k).or_insert_with(|| realization.cell(k));
        let piece = cell.piece_at(x - k as f64);
        let q = &piece.eigenvectors;
        let mut scaled = q.clone();
        for (c, lambda) in piece.eigenvalues.iter().enumerate() {
            scaled.column_mut(c).scale_mut((-ds * lambda).exp());
        }
        let step = scaled * q.transpose();
        product = step * product;
        let remaining = t - j as f64 * ds;
        if j + 1 < steps {
            let frac = ds / remaining;
            let mean = x * (1.0 - frac);
            let var = 2.0 * ds * (1.0 - frac);
            let z: f64 = StandardNormal.sample(&mut rng);
            x = mean + var.sqrt() * z;
        }
    }
    product.trace()
}
