//! Empirical regularity diagnostics.
//!
//! - [`hoelder_exponent`]: slope of `log max|f(x+ℓ) - f(x)|` against `log ℓ`
//!   over dyadic lags.
//! - [`check_bounds`]: sampled verification of the a-priori growth and
//!   Lipschitz bounds for `∧^p` of cell transfers.
//! - [`lie_algebra_rank`]: dimension of the Lie algebra generated by logs of
//!   near-identity powers of transfer matrices, compared with `dim sp_N`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{commutator, numerical_rank, op_norm};
use crate::model::{sample_cell, stream_rng, DisorderSpec};
use crate::par;
use crate::stats::linear_fit;
use crate::transfer::{cell_transfer, compound_matrix};

pub const MIN_HOELDER_SAMPLES: usize = 128;
const EXCLUDED_SCALES: usize = 2;
const BOUND_STREAM: u64 = 0x626e_6473; // "bnds"
const RANK_CELLS: i64 = 16;
const HYPERBOLIC_ESCAPE: f64 = 1e6;
pub const NEAR_IDENTITY: f64 = 0.5;

#[derive(Clone, Debug, Serialize)]
pub struct HoelderEstimate {
    pub interval: (f64, f64),
    pub alpha_hat: f64,
    pub c_hat: f64,
    pub regression_r2: f64,
    /// Lags (in `x` units) entering the regression.
    pub scales: Vec<f64>,
    pub increments: Vec<f64>,
    /// Set when all increments vanish; `alpha_hat` is then 1 by convention.
    pub constant_function: bool,
}

/// Hölder exponent from samples of `f` on a uniform grid over `interval`.
pub fn hoelder_exponent(values: &[f64], interval: (f64, f64)) -> Result<HoelderEstimate> {
    let n = values.len();
    if n < MIN_HOELDER_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_HOELDER_SAMPLES} samples, got {n}")));
    }
    if !(interval.1 > interval.0) {
        return Err(Error::Domain("interval must have positive length".into()));
    }
    let step = (interval.1 - interval.0) / (n - 1) as f64;
    let mut lags = Vec::new();
    let mut lag = 1usize;
    while lag < n {
        lags.push(lag);
        lag *= 2;
    }
    let central = &lags[EXCLUDED_SCALES..lags.len() - EXCLUDED_SCALES];
    let increments: Vec<f64> =
        central.iter().map(|&l| (0..n - l).map(|i| (values[i + l] - values[i]).abs()).fold(0.0, f64::max)).collect();
    let scales: Vec<f64> = central.iter().map(|&l| l as f64 * step).collect();
    if increments.iter().all(|&v| v == 0.0) {
        return Ok(HoelderEstimate {
            interval,
            alpha_hat: 1.0,
            c_hat: 0.0,
            regression_r2: 1.0,
            scales,
            increments,
            constant_function: true,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        scales.iter().zip(&increments).filter(|(_, &v)| v > 0.0).map(|(s, v)| (s.ln(), v.ln())).unzip();
    let fit = linear_fit(&xs, &ys);
    Ok(HoelderEstimate {
        interval,
        alpha_hat: fit.slope.clamp(f64::MIN_POSITIVE, 1.0),
        c_hat: fit.intercept.exp(),
        regression_r2: fit.r2,
        scales,
        increments,
        constant_function: false,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundConstants {
    /// `sup ||V||`.
    pub c1: f64,
    pub interval: (f64, f64),
    /// `exp(C1 + max|E| + 1)`, bounding `||A||²`.
    pub c2: f64,
    /// `exp(2 C1 + 2 + 2 |I|)`, the Lipschitz constant of `E ↦ A(E)`.
    pub c3: f64,
}

impl BoundConstants {
    pub fn new(spec: &DisorderSpec, interval: (f64, f64)) -> Result<Self> {
        if !(interval.1 >= interval.0) || !interval.0.is_finite() || !interval.1.is_finite() {
            return Err(Error::Domain(format!("interval {interval:?} is not compact")));
        }
        let c1 = spec.v_max();
        let emax = interval.0.abs().max(interval.1.abs());
        Ok(Self {
            c1,
            interval,
            c2: (c1 + emax + 1.0).exp(),
            c3: (2.0 * c1 + 2.0 + 2.0 * (interval.1 - interval.0)).exp(),
        })
    }

    /// `||∧^p A(E)||² ≤ exp(p (C1 + |E| + 1))`.
    pub fn growth_bound(&self, p: usize, energy: f64) -> f64 {
        (p as f64 * (self.c1 + energy.abs() + 1.0)).exp()
    }

    /// Lipschitz constant of `E ↦ ∧^p A(E)`: `p C2^{p-1} C3`.
    pub fn lipschitz_bound(&self, p: usize) -> f64 {
        p as f64 * self.c2.powi(p as i32 - 1) * self.c3
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub constants: BoundConstants,
    pub samples: usize,
    /// Largest `||∧^p A||² / bound` over samples and `p`.
    pub max_growth_ratio: f64,
    /// Largest `||∧^p A(E) - ∧^p A(E')|| / (bound |E - E'|)`.
    pub max_lipschitz_ratio: f64,
}

struct BoundSample {
    growth: f64,
    lipschitz: f64,
    cell: i64,
    e: f64,
    e_prime: f64,
    p: usize,
}

/// Samples `(cell, E, E')` and checks both bounds for every `p ≤ N`.
pub fn check_bounds(spec: &DisorderSpec, interval: (f64, f64), n_samples: usize, seed: u64) -> Result<BoundReport> {
    let constants = BoundConstants::new(spec, interval)?;
    spec.validate()?;
    let samples: Vec<Vec<BoundSample>> = par::map_range(n_samples, |i| {
        let mut rng = stream_rng(seed, BOUND_STREAM, i as u64);
        let cell_index = i as i64;
        let cell = sample_cell(spec, seed, cell_index)?;
        let e = rng.random_range(interval.0..=interval.1);
        let e_prime = rng.random_range(interval.0..=interval.1);
        let a = cell_transfer(&cell, e);
        let b = cell_transfer(&cell, e_prime);
        (1..=spec.channels)
            .map(|p| {
                let wa = compound_matrix(a.matrix(), p)?;
                let wb = compound_matrix(b.matrix(), p)?;
                let growth = op_norm(&wa).powi(2) / constants.growth_bound(p, e);
                let gap = (e - e_prime).abs();
                let lipschitz =
                    if gap == 0.0 { 0.0 } else { op_norm(&(wa - wb)) / (constants.lipschitz_bound(p) * gap) };
                Ok(BoundSample { growth, lipschitz, cell: cell_index, e, e_prime, p })
            })
            .collect()
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let flat: Vec<&BoundSample> = samples.iter().flatten().collect();
    if let Some(bad) = flat.iter().find(|s| s.growth > 1.0 || s.lipschitz > 1.0) {
        return Err(Error::BoundViolation(format!(
            "cell {} (seed {seed}), p = {}, E = {}, E' = {}: growth ratio {}, Lipschitz ratio {}",
            bad.cell, bad.p, bad.e, bad.e_prime, bad.growth, bad.lipschitz
        )));
    }
    Ok(BoundReport {
        constants,
        samples: n_samples,
        max_growth_ratio: flat.iter().map(|s| s.growth).fold(0.0, f64::max),
        max_lipschitz_ratio: flat.iter().map(|s| s.lipschitz).fold(0.0, f64::max),
    })
}

fn sqrtm_denman_beavers(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut y = m.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..60 {
        let yi = y.clone().try_inverse().ok_or_else(|| Error::Numerical("square-root iteration singular".into()))?;
        let zi = z.clone().try_inverse().ok_or_else(|| Error::Numerical("square-root iteration singular".into()))?;
        let next = (&y + zi) * 0.5;
        z = (&z + yi) * 0.5;
        let change = (&next - &y).norm();
        y = next;
        if change <= 1e-15 * y.norm() {
            return Ok(y);
        }
    }
    Ok(y)
}

/// Principal logarithm of `M` with `||M - I|| < 0.5`.
///
/// Square roots are taken until `||M - I|| < 0.05`; the remaining factor goes
/// through the series `log(I + X) = Σ (-1)^{k+1} X^k / k`, and the result is
/// scaled back by `2^s`.
pub fn matrix_log_near_identity(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Domain("matrix logarithm needs a square matrix".into()));
    }
    let n = m.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let dist = op_norm(&(m - &id));
    if !(dist < NEAR_IDENTITY) {
        return Err(Error::Domain(format!("||M - I|| = {dist} is not below {NEAR_IDENTITY}")));
    }
    let mut root = m.clone();
    let mut squarings = 0;
    while op_norm(&(&root - &id)) >= 0.05 {
        root = sqrtm_denman_beavers(&root)?;
        squarings += 1;
    }
    let x = root - &id;
    let mut power = x.clone();
    let mut acc = x.clone();
    for k in 2..200 {
        power = &power * &x;
        let term = &power / k as f64;
        if k % 2 == 0 {
            acc -= &term;
        } else {
            acc += &term;
        }
        if term.norm() < 1e-18 {
            break;
        }
    }
    Ok(acc * 2f64.powi(squarings))
}

/// Dimension of the Lie algebra generated by `generators`.
///
/// Generators are added one at a time, then brackets of basis pairs, until
/// the span stops growing. A candidate is kept only if it raises the
/// numerical rank (singular values above `tolerance · σ_max`) of the stacked
/// vectorized basis; kept elements are Gram–Schmidt orthonormalized.
pub fn span_closure(generators: &[DMatrix<f64>], tolerance: f64) -> usize {
    let Some(first) = generators.first() else {
        return 0;
    };
    let cap = first.nrows() * first.ncols();
    let mut basis: Vec<DMatrix<f64>> = Vec::new();
    let try_add = |basis: &mut Vec<DMatrix<f64>>, c: &DMatrix<f64>| -> bool {
        let norm = c.norm();
        if norm == 0.0 || basis.len() >= cap {
            return false;
        }
        let c = c / norm;
        let rows: Vec<f64> = basis.iter().chain(std::iter::once(&c)).flat_map(|b| b.iter().copied()).collect();
        let stacked = DMatrix::from_column_slice(cap, basis.len() + 1, &rows);
        if numerical_rank(&stacked, tolerance) <= basis.len() {
            return false;
        }
        let mut r = c.clone();
        for b in basis.iter() {
            r -= b * b.dot(&c);
        }
        let rn = r.norm();
        basis.push(r / rn);
        true
    };
    for g in generators {
        try_add(&mut basis, g);
    }
    let mut checked = 0;
    loop {
        let size = basis.len();
        let mut grew = false;
        for i in 0..size {
            for j in (i + 1).max(checked)..size {
                let c = commutator(&basis[i], &basis[j]);
                grew |= try_add(&mut basis, &c);
            }
        }
        checked = size;
        if !grew {
            return basis.len();
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RankGenerator {
    /// Indices into the distinct sampled cell transfers, applied left to right.
    pub word: Vec<usize>,
    pub power: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RankReport {
    pub energy: f64,
    pub distinct_transfers: usize,
    pub generators: Vec<RankGenerator>,
    pub dimension: usize,
    /// `N(2N + 1) = dim sp_N`.
    pub target: usize,
    pub tolerance: f64,
    /// No near-identity power was found for any word.
    pub inconclusive: bool,
    pub min_power_used: Option<usize>,
}

impl RankReport {
    pub fn full(&self) -> bool {
        self.dimension == self.target
    }
}

/// Smallest `k ≤ max_power` with `||A^k - I|| < NEAR_IDENTITY`.
fn near_identity_power(a: &DMatrix<f64>, max_power: usize) -> Option<(usize, DMatrix<f64>)> {
    let id = DMatrix::<f64>::identity(a.nrows(), a.ncols());
    let mut p = a.clone();
    for k in 1..=max_power {
        // Frobenius dominates the operator norm, so it is a cheap pre-filter.
        let frob = (&p - &id).norm();
        if frob < 2.0 * NEAR_IDENTITY && op_norm(&(&p - &id)) < NEAR_IDENTITY {
            return Some((k, p));
        }
        if p.norm() > HYPERBOLIC_ESCAPE {
            return None;
        }
        p = &p * a;
    }
    None
}

/// A word, its near-identity power and the logarithm of that power.
type FoundWord = (Vec<usize>, usize, DMatrix<f64>);

/// Lie-algebra rank test at energy `E` from sampled cell transfers.
pub fn lie_algebra_rank(
    spec: &DisorderSpec,
    energy: f64,
    max_power: usize,
    tolerance: f64,
    seed: u64,
) -> Result<RankReport> {
    if max_power < 10 {
        return Err(Error::Domain(format!("max_power {max_power} below 10")));
    }
    if !energy.is_finite() {
        return Err(Error::Domain("energy must be finite".into()));
    }
    let mut transfers: Vec<DMatrix<f64>> = Vec::new();
    for n in 0..RANK_CELLS {
        let t = cell_transfer(&sample_cell(spec, seed, n)?, energy).into_matrix();
        if transfers.iter().all(|u| (u - &t).norm() > 1e-12 * t.norm()) {
            transfers.push(t);
        }
    }
    let k = transfers.len();
    let mut words: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    for i in 0..k {
        for j in 0..k {
            if i != j {
                words.push(vec![i, j]);
            }
        }
    }
    let found: Vec<Option<FoundWord>> = par::map_slice(&words, |w| {
        let product = w
            .iter()
            .fold(DMatrix::<f64>::identity(2 * spec.channels, 2 * spec.channels), |acc, &i| &transfers[i] * acc);
        let (power, near) = near_identity_power(&product, max_power)?;
        matrix_log_near_identity(&near).ok().map(|log| (w.clone(), power, log))
    });
    let found: Vec<_> = found.into_iter().flatten().collect();
    let logs: Vec<DMatrix<f64>> = found.iter().map(|f| f.2.clone()).collect();
    let n = spec.channels;
    Ok(RankReport {
        energy,
        distinct_transfers: k,
        generators: found.iter().map(|f| RankGenerator { word: f.0.clone(), power: f.1 }).collect(),
        dimension: span_closure(&logs, tolerance),
        target: n * (2 * n + 1),
        tolerance,
        inconclusive: found.is_empty(),
        min_power_used: found.iter().map(|f| f.1).min(),
    })
}

/// [`lie_algebra_rank`] over an energy grid.
pub fn rank_sweep(
    spec: &DisorderSpec,
    energies: &[f64],
    max_power: usize,
    tolerance: f64,
    seed: u64,
) -> Result<Vec<RankReport>> {
    par::map_slice(energies, |&e| lie_algebra_rank(spec, e, max_power, tolerance, seed)).into_iter().collect()
}

/// Basis `J S` of `sp_N(ℝ)`, one element per symmetric unit matrix `S`.
pub fn sp_basis(n: usize) -> Vec<DMatrix<f64>> {
    let j = crate::linalg::symplectic_form(n);
    let mut out = Vec::new();
    for r in 0..2 * n {
        for c in r..2 * n {
            let mut s = DMatrix::<f64>::zeros(2 * n, 2 * n);
            s[(r, c)] = 1.0;
            s[(c, r)] = 1.0;
            out.push(&j * s);
        }
    }
    out
}
