//! The Thouless relation `γ₁ + … + γ_N (E) = -α + ∫ log|(E' - E)/(E' - i)| dN(E')`
//! and the discrete Hilbert transform.
//!
//! `N` is taken piecewise linear between table nodes, with any mass below the
//! first node placed there as an atom. On each linear piece the logarithmic
//! integrals have closed forms, so the singularity at `E' = E` is integrated
//! exactly and no principal-value cutoff is needed.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ids::IdsTable;
use crate::par;
use crate::stats::simpson;

/// Minimum distance from the table ends, in grid steps.
pub const EDGE_MARGIN: usize = 4;
const TAIL_PANELS: usize = 400;

/// `∫ log|u| du = u log|u| - u`.
fn log_abs_antiderivative(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * u.abs().ln() - u
    }
}

/// `∫ log(1 + x²) dx`.
fn log_one_plus_sq_antiderivative(x: f64) -> f64 {
    x * x.mul_add(x, 1.0).ln() - 2.0 * x + 2.0 * x.atan()
}

fn kernel(e_prime: f64, e: f64) -> f64 {
    (e_prime - e).abs().ln() - 0.5 * e_prime.mul_add(e_prime, 1.0).ln()
}

/// `∫_{E_K}^∞ channels/(2π√(E' - c)) log|(E' - E)/(E' - i)| dE'` via
/// `s = (E' - c)^{-1/2}`.
///
/// The shift `c` is chosen so the tail IDS `(channels/π)√(E' - c)` meets the
/// table value `n_top` at `E_K`. For large energies `c` approaches the mean
/// of the potential's eigenvalues, the leading correction to the free count,
/// whose omission would bias the integral by about `E 𝔼Tr V/(6π E_K^{3/2})`.
fn free_tail(channels: usize, top: f64, n_top: f64, e: f64) -> f64 {
    if channels == 0 {
        return 0.0;
    }
    let c = if n_top > 0.0 { top - (PI * n_top / channels as f64).powi(2) } else { 0.0 };
    if top - c <= 0.0 {
        return 0.0;
    }
    let f = |s: f64| {
        let s2 = s * s;
        if s2 == 0.0 {
            return -e;
        }
        (((c - e) * s2).ln_1p() - 0.5 * (c * s2).mul_add(2.0 + c * s2, s2 * s2).ln_1p()) / s2
    };
    channels as f64 / PI * simpson(f, 0.0, (top - c).powf(-0.5), TAIL_PANELS)
}

/// `∫ log|(E' - E)/(E' - i)| dN(E')`.
pub fn thouless_rhs(table: &IdsTable, e: f64) -> Result<f64> {
    let en = &table.energies;
    let k = en.len();
    if k < 2 * EDGE_MARGIN + 1 {
        return Err(Error::Domain("IDS table too short for the Thouless integral".into()));
    }
    let lo = en[EDGE_MARGIN];
    let hi = en[k - 1 - EDGE_MARGIN];
    if !(e >= lo && e <= hi) {
        return Err(Error::Domain(format!(
            "E = {e} closer than {EDGE_MARGIN} grid steps to the table edge [{}, {}]",
            en[0],
            en[k - 1]
        )));
    }
    let n = &table.counts_per_volume;
    let mut acc = n[0] * kernel(en[0], e);
    for j in 1..k {
        let (a, b) = (en[j - 1], en[j]);
        let slope = (n[j] - n[j - 1]) / (b - a);
        if slope == 0.0 {
            continue;
        }
        let near = log_abs_antiderivative(b - e) - log_abs_antiderivative(a - e);
        let far = log_one_plus_sq_antiderivative(b) - log_one_plus_sq_antiderivative(a);
        acc += slope * (near - 0.5 * far);
    }
    Ok(acc + free_tail(table.channels, en[k - 1], n[k - 1], e))
}

/// Single-constant fit `γ(E) ≈ -α + rhs(E)`.
#[derive(Clone, Debug, Serialize)]
pub struct ThoulessFit {
    pub alpha: f64,
    pub energies: Vec<f64>,
    pub gamma_sums: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `γ(E) - (rhs(E) - α)`.
    pub residuals: Vec<f64>,
    pub rms: f64,
}

pub fn thouless_fit(energies: &[f64], gamma_sums: &[f64], table: &IdsTable) -> Result<ThoulessFit> {
    if energies.len() != gamma_sums.len() {
        return Err(Error::Domain("energy and γ-sum columns differ in length".into()));
    }
    if energies.len() < 10 {
        return Err(Error::Domain(format!("need at least 10 energies, got {}", energies.len())));
    }
    let rhs: Vec<f64> = par::map_slice(energies, |&e| thouless_rhs(table, e)).into_iter().collect::<Result<_>>()?;
    let alpha = rhs.iter().zip(gamma_sums).map(|(r, g)| r - g).sum::<f64>() / energies.len() as f64;
    let residuals: Vec<f64> = rhs.iter().zip(gamma_sums).map(|(r, g)| g - (r - alpha)).collect();
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    Ok(ThoulessFit { alpha, energies: energies.to_vec(), gamma_sums: gamma_sums.to_vec(), rhs, residuals, rms })
}

/// Hilbert transform `(Tψ)(x) = (1/π) p.v. ∫ ψ(t)/(x - t) dt` on a uniform grid.
///
/// The samples are joined by the piecewise linear interpolant and the
/// principal value of each hat function is taken exactly at the nodes. This
/// removes the first-order bias `(ln 2/π) h ψ'` that a piecewise constant
/// reading of point samples leaves behind. The singular node itself carries
/// weight zero. The resulting Toeplitz product is evaluated by FFT
/// convolution. The kernel depends only on the offset, so the grid step
/// drops out.
pub fn hilbert(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let size = (2 * n - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let mut signal: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    signal.resize(size, Complex::new(0.0, 0.0));
    let mut filter = vec![Complex::new(0.0, 0.0); size];
    for d in 1..n {
        let k = hilbert_weight(d as i64);
        filter[d] = Complex::new(k, 0.0);
        filter[size - d] = Complex::new(-k, 0.0);
    }
    forward.process(&mut signal);
    forward.process(&mut filter);
    for (s, f) in signal.iter_mut().zip(&filter) {
        *s *= f;
    }
    inverse.process(&mut signal);
    signal[..n].iter().map(|c| c.re / size as f64).collect()
}

/// Weight of grid offset `d` in [`hilbert`]: the transform of the unit hat
/// centred at 0, `(1/π)[(d+1)ln|d+1| - 2d ln|d| + (d-1)ln|d-1|]`.
pub fn hilbert_weight(d: i64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    let xlogx = |x: f64| if x == 0.0 { 0.0 } else { x * x.abs().ln() };
    let d = d as f64;
    (xlogx(d + 1.0) - 2.0 * xlogx(d) + xlogx(d - 1.0)) / PI
}
