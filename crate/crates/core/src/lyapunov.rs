//! Lyapunov spectrum of the random transfer-matrix cocycle.
//!
//! Two independent estimators:
//! - [`lyapunov_spectrum`]: an orthonormal `2N`-frame pushed through the
//!   cell transfers and re-orthonormalized by QR (positive diagonal); the
//!   logs of `diag R` accumulate to the exponents.
//! - [`lyapunov_sum_p`]: growth of `∧^p` applied to a fixed decomposable
//!   `p`-vector, giving `γ_1 + … + γ_p` directly.
//!
//! Error bars come from batch means over contiguous runs of cells.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::qr_positive;
use crate::model::{DisorderSpec, Realization};
use crate::par;
use crate::stats::mean_se;
use crate::transfer::{cell_transfer, compound_matrix};

pub const MIN_BATCHES: usize = 20;

/// Keep the accumulated frame norm below 1e100 between renormalizations.
const LOG_GROWTH_CAP: f64 = 230.0;

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovSpectrum {
    pub energy: f64,
    /// `γ_1 >= … >= γ_2N`.
    pub exponents: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub cells_used: usize,
    pub seed: u64,
    /// Renormalization period actually used (after overflow capping).
    pub renorm_period: usize,
    #[serde(skip)]
    batch_estimates: Vec<Vec<f64>>,
}

impl LyapunovSpectrum {
    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// `γ_1 + … + γ_p` with its batch-means standard error.
    pub fn partial_sum(&self, p: usize) -> (f64, f64) {
        let p = p.min(self.dim());
        let value = self.exponents[..p].iter().sum();
        let sums: Vec<f64> = self.batch_estimates.iter().map(|b| b[..p].iter().sum()).collect();
        (value, mean_se(&sums).1)
    }

    /// `γ_i + γ_{2N-1-i}` with the joint error `SE_i + SE_{2N-1-i}`.
    pub fn pair_sum(&self, i: usize) -> (f64, f64) {
        let j = self.dim() - 1 - i;
        (self.exponents[i] + self.exponents[j], self.standard_errors[i] + self.standard_errors[j])
    }
}

/// Sum of the top `p` exponents from the exterior-power route.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PartialSum {
    pub p: usize,
    pub value: f64,
    pub standard_error: f64,
    pub cells_used: usize,
}

fn growth_cap(spec: &DisorderSpec, energy: f64) -> usize {
    let per_cell = 0.5 * (spec.v_max() + energy.abs() + 1.0);
    ((LOG_GROWTH_CAP / per_cell).floor() as usize).max(1)
}

/// Smallest admissible `min r_ii / max r_ii` after a multi-cell block.
const DYNAMIC_RANGE: f64 = 1e-10;

/// Pushes `frame` through `cells` and re-orthonormalizes; returns `Q` and `log r_ii`.
fn advance_unchecked(
    realization: &Realization,
    energy: f64,
    frame: &DMatrix<f64>,
    cells: std::ops::Range<usize>,
) -> (DMatrix<f64>, Vec<f64>) {
    let mut f = frame.clone();
    for n in cells {
        f = cell_transfer(&realization.cell(n as i64), energy).matrix() * f;
    }
    let (q, r) = qr_positive(f);
    let logs = r.diagonal().iter().map(|d| d.ln()).collect();
    (q, logs)
}

/// Like [`advance_unchecked`], but `None` if the block spans more than one
/// cell and the contracting directions were swamped by roundoff.
fn advance(
    realization: &Realization,
    energy: f64,
    frame: &DMatrix<f64>,
    cells: std::ops::Range<usize>,
) -> Option<(DMatrix<f64>, Vec<f64>)> {
    let multi = cells.len() > 1;
    let (q, logs) = advance_unchecked(realization, energy, frame, cells);
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = lo.is_finite() && hi.is_finite() && lo - hi >= DYNAMIC_RANGE.ln();
    (ok || !multi).then_some((q, logs))
}

/// QR-renormalized estimate of the whole spectrum.
///
/// Blocks of `renorm_period` cells are shortened automatically when the
/// frame would overflow or lose the contracting directions to roundoff.
pub fn lyapunov_spectrum(
    spec: &DisorderSpec,
    energy: f64,
    n_cells: usize,
    seed: u64,
    renorm_period: usize,
) -> Result<LyapunovSpectrum> {
    if renorm_period == 0 || n_cells < renorm_period {
        return Err(Error::Domain(format!("need n_cells >= renorm_period >= 1 (got {n_cells}, {renorm_period})")));
    }
    let realization = Realization::new(spec, seed)?;
    let period = renorm_period.min(growth_cap(spec, energy));
    let blocks = n_cells.div_ceil(period);
    if blocks < MIN_BATCHES {
        return Err(Error::Statistics(format!(
            "{n_cells} cells give {blocks} renormalization blocks; at least {MIN_BATCHES} needed for batch means"
        )));
    }
    let dim = 2 * spec.channels;
    let mut frame = DMatrix::<f64>::identity(dim, dim);
    let mut batch_logs = vec![vec![0.0; dim]; MIN_BATCHES];
    let mut batch_cells = vec![0usize; MIN_BATCHES];
    let mut total = vec![0.0; dim];
    let mut cell = 0usize;
    for block in 0..blocks {
        let batch = block * MIN_BATCHES / blocks;
        let end = (cell + period).min(n_cells);
        let (q, logs) = match advance(&realization, energy, &frame, cell..end) {
            Some(done) => done,
            None => {
                // Range lost inside the block: renormalize after every cell instead.
                let mut logs = vec![0.0; dim];
                let mut f = frame.clone();
                for n in cell..end {
                    let (q, l) = advance_unchecked(&realization, energy, &f, n..n + 1);
                    f = q;
                    logs.iter_mut().zip(&l).for_each(|(a, b)| *a += b);
                }
                (f, logs)
            }
        };
        frame = q;
        batch_cells[batch] += end - cell;
        cell = end;
        for (i, l) in logs.into_iter().enumerate() {
            batch_logs[batch][i] += l;
            total[i] += l;
        }
    }
    let batch_estimates: Vec<Vec<f64>> =
        batch_logs.iter().zip(&batch_cells).map(|(logs, &c)| logs.iter().map(|l| l / c as f64).collect()).collect();
    let mut pairs: Vec<(f64, f64, usize)> = (0..dim)
        .map(|i| {
            let col: Vec<f64> = batch_estimates.iter().map(|b| b[i]).collect();
            (total[i] / n_cells as f64, mean_se(&col).1, i)
        })
        .collect();
    if pairs.iter().any(|p| !p.0.is_finite()) {
        return Err(Error::Numerical(format!("non-finite exponent at E = {energy}: transfer entries overflowed")));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let order: Vec<usize> = pairs.iter().map(|p| p.2).collect();
    Ok(LyapunovSpectrum {
        energy,
        exponents: pairs.iter().map(|p| p.0).collect(),
        standard_errors: pairs.iter().map(|p| p.1).collect(),
        cells_used: n_cells,
        seed,
        renorm_period: period,
        batch_estimates: batch_estimates.into_iter().map(|b| order.iter().map(|&i| b[i]).collect()).collect(),
    })
}

/// `γ_1 + … + γ_p` from the norm growth of `∧^p` on `e_1 ∧ … ∧ e_p`.
pub fn lyapunov_sum_p(spec: &DisorderSpec, energy: f64, p: usize, n_cells: usize, seed: u64) -> Result<PartialSum> {
    if p == 0 || p > spec.channels {
        return Err(Error::Domain(format!("p = {p} outside 1..={}", spec.channels)));
    }
    if n_cells < MIN_BATCHES {
        return Err(Error::Statistics(format!("{n_cells} cells cannot form {MIN_BATCHES} batches")));
    }
    let realization = Realization::new(spec, seed)?;
    let dim = 2 * spec.channels;
    let k = compound_matrix(&DMatrix::<f64>::identity(dim, dim), p)?.nrows();
    let mut v = DVector::<f64>::zeros(k);
    // Lexicographic index 0 is the subset {0, …, p-1}.
    v[0] = 1.0;
    let mut batch_logs = [0.0; MIN_BATCHES];
    let mut batch_cells = [0usize; MIN_BATCHES];
    let mut total = 0.0;
    for n in 0..n_cells {
        let t = cell_transfer(&realization.cell(n as i64), energy);
        let wedge = compound_matrix(t.matrix(), p)?;
        v = wedge * v;
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical(format!("p-vector norm degenerated at cell {n}")));
        }
        v /= norm;
        let l = norm.ln();
        let batch = n * MIN_BATCHES / n_cells;
        batch_logs[batch] += l;
        batch_cells[batch] += 1;
        total += l;
    }
    let means: Vec<f64> = batch_logs.iter().zip(&batch_cells).map(|(l, &c)| l / c as f64).collect();
    Ok(PartialSum { p, value: total / n_cells as f64, standard_error: mean_se(&means).1, cells_used: n_cells })
}

/// Spectra over an energy grid, one independent task per energy.
///
/// Every energy uses the same disorder realization, so the curve is smooth
/// in `E` (common random numbers).
pub fn lyapunov_sweep(
    spec: &DisorderSpec,
    energies: &[f64],
    n_cells: usize,
    seed: u64,
    renorm_period: usize,
) -> Result<Vec<LyapunovSpectrum>> {
    par::map_slice(energies, |&e| lyapunov_spectrum(spec, e, n_cells, seed, renorm_period)).into_iter().collect()
}
