//! Matrix m-functions, Kotani's `w`-function and the Green kernel on the
//! diagonal, at complex energies `z = e + i a` with `a > 0`.
//!
//! `M₊` is the logarithmic derivative `F₊' F₊^{-1}` of the matrix solution
//! decaying at `+∞`. It is approximated by imposing a Dirichlet condition at
//! distance `L_w` to the right and propagating back with the exact cell
//! transfers; `M₋` is the mirror construction with a sign flip, so that both
//! are Herglotz. The coincident-point Green kernel is `-(M₊ + M₋)^{-1}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::IdsTable;
use crate::model::{derive_seed, stream_rng, DisorderSpec, Realization};
use crate::par;
use crate::stats::{mean_se, simpson};
use crate::transfer::{cell_transfer_complex, cell_transfer_complex_backward, transfer_between_complex};

pub const DEFAULT_WINDOW: usize = 50;
const MIN_WINDOW: usize = 10;
const SINGULAR_COND: f64 = 1e12;
const W_REALIZATION: u64 = 0x7772_6561; // "wrea"
const W_BASE: u64 = 0x7762_6173; // "wbas"

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexEnergy {
    pub e: f64,
    pub a: f64,
}

impl ComplexEnergy {
    pub fn new(e: f64, a: f64) -> Result<Self> {
        if !(a > 0.0) || !e.is_finite() || !a.is_finite() {
            return Err(Error::Domain(format!("z = {e} + {a}i must lie in the open upper half-plane")));
        }
        Ok(Self { e, a })
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.e, self.a)
    }
}

#[derive(Clone, Debug)]
pub struct MFunction {
    pub z: ComplexEnergy,
    pub m_plus: DMatrix<Complex64>,
    pub m_minus: DMatrix<Complex64>,
    pub truncation_length: usize,
    /// Position (inside cell 0) at which both functions are evaluated.
    pub base_point: f64,
}

impl MFunction {
    pub fn green(&self) -> Result<DMatrix<Complex64>> {
        green_at_zero(&self.m_plus, &self.m_minus)
    }

    /// `½ Tr(M₊ + M₋)`.
    pub fn half_trace(&self) -> Complex64 {
        (self.m_plus.trace() + self.m_minus.trace()) * 0.5
    }
}

fn check_window(l_w: usize) -> Result<()> {
    if l_w < MIN_WINDOW {
        return Err(Error::Domain(format!("truncation length {l_w} below {MIN_WINDOW} cells")));
    }
    Ok(())
}

fn condition(m: &DMatrix<Complex64>) -> f64 {
    let sv = m.singular_values();
    sv.max() / sv.min()
}

/// `Y' Y^{-1}` for a `2N x N` frame `(Y; Y')`.
fn log_derivative(frame: &DMatrix<Complex64>, side: &str, l_w: usize) -> Result<DMatrix<Complex64>> {
    let n = frame.ncols();
    let y = frame.rows(0, n).into_owned();
    let dy = frame.rows(n, n).into_owned();
    let cond = condition(&y);
    if !(cond < SINGULAR_COND) {
        return Err(Error::Numerical(format!(
            "Y(0) singular for {side} (condition {cond:.3e}) at L_w = {l_w}; increase L_w"
        )));
    }
    let inv = y.try_inverse().ok_or_else(|| Error::Numerical(format!("Y(0) not invertible for {side}")))?;
    Ok(dy * inv)
}

fn renormalize(frame: DMatrix<Complex64>) -> DMatrix<Complex64> {
    frame.qr().q()
}

fn m_plus_at(realization: &Realization, z: Complex64, l_w: usize, base: f64) -> Result<DMatrix<Complex64>> {
    let n = realization.spec().channels;
    let mut frame = DMatrix::<Complex64>::zeros(2 * n, n);
    for c in 0..n {
        frame[(n + c, c)] = Complex64::new(-1.0, 0.0);
    }
    for k in (1..l_w as i64).rev() {
        frame = renormalize(cell_transfer_complex_backward(&realization.cell(k), z) * frame);
    }
    frame = transfer_between_complex(&realization.cell(0), z, 1.0, base) * frame;
    log_derivative(&frame, "M+", l_w)
}

fn m_minus_at(realization: &Realization, z: Complex64, l_w: usize, base: f64) -> Result<DMatrix<Complex64>> {
    let n = realization.spec().channels;
    let mut frame = DMatrix::<Complex64>::zeros(2 * n, n);
    for c in 0..n {
        frame[(n + c, c)] = Complex64::new(1.0, 0.0);
    }
    for k in -(l_w as i64)..0 {
        frame = renormalize(cell_transfer_complex(&realization.cell(k), z) * frame);
    }
    frame = transfer_between_complex(&realization.cell(0), z, 0.0, base) * frame;
    Ok(-log_derivative(&frame, "M-", l_w)?)
}

/// `M₊(z)` at `x = 0` with a Dirichlet wall at `x = L_w`.
pub fn m_plus(spec: &DisorderSpec, seed: u64, z: ComplexEnergy, l_w: usize) -> Result<DMatrix<Complex64>> {
    check_window(l_w)?;
    m_plus_at(&Realization::new(spec, seed)?, z.z(), l_w, 0.0)
}

/// `M₋(z)` at `x = 0` with a Dirichlet wall at `x = -L_w`.
pub fn m_minus(spec: &DisorderSpec, seed: u64, z: ComplexEnergy, l_w: usize) -> Result<DMatrix<Complex64>> {
    check_window(l_w)?;
    m_minus_at(&Realization::new(spec, seed)?, z.z(), l_w, 0.0)
}

/// Both m-functions at `base_point ∈ [0, 1)`.
pub fn m_functions(spec: &DisorderSpec, seed: u64, z: ComplexEnergy, l_w: usize, base_point: f64) -> Result<MFunction> {
    check_window(l_w)?;
    if !(0.0..1.0).contains(&base_point) {
        return Err(Error::Domain(format!("base point {base_point} outside [0, 1)")));
    }
    let r = Realization::new(spec, seed)?;
    Ok(MFunction {
        z,
        m_plus: m_plus_at(&r, z.z(), l_w, base_point)?,
        m_minus: m_minus_at(&r, z.z(), l_w, base_point)?,
        truncation_length: l_w,
        base_point,
    })
}

/// `G_z(0, 0) = -(M₊ + M₋)^{-1}`.
pub fn green_at_zero(m_plus: &DMatrix<Complex64>, m_minus: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let sum = m_plus + m_minus;
    let cond = condition(&sum);
    if !(cond < SINGULAR_COND) {
        return Err(Error::Numerical(format!("M+ + M- is singular (condition {cond:.3e})")));
    }
    sum.try_inverse().map(|inv| -inv).ok_or_else(|| Error::Numerical("M+ + M- is not invertible".into()))
}

/// `Tr((Im M)^{-1})` with `Im M = (M - M*)/(2i)`.
pub fn im_inverse_trace(m: &DMatrix<Complex64>) -> Result<f64> {
    let im = (m - m.adjoint()) * Complex64::new(0.0, -0.5);
    im.try_inverse().map(|inv| inv.trace().re).ok_or_else(|| Error::Numerical("Im M is singular".into()))
}

/// Sample average of `w` and `Tr G` over realizations.
#[derive(Clone, Debug)]
pub struct WValue {
    pub z: ComplexEnergy,
    pub w: Complex64,
    /// Standard errors of the real and imaginary parts of `w`.
    pub w_se: (f64, f64),
    /// `𝔼 Tr G_z(0, 0)`.
    pub green_trace: Complex64,
    pub green_se: (f64, f64),
    /// `𝔼 Tr((Im M₊)^{-1}) · a / 2`, which should match `-Re w`.
    pub im_inverse: f64,
    pub im_inverse_se: f64,
    pub truncation_length: usize,
    pub realizations: usize,
    /// Realizations with `Im w ≤ 0` or `Im Tr G ≤ 0`.
    pub herglotz_violations: usize,
    pub min_im_w: f64,
    pub min_im_green: f64,
}

/// Per-realization quantities behind [`WValue`].
#[derive(Clone, Debug)]
pub struct WSample {
    pub w: Complex64,
    pub green_trace: Complex64,
    pub im_inverse: f64,
}

/// Base point of realization `r`: stratified uniform on `[0, 1)`.
fn base_point(seed: u64, r: usize, n: usize) -> f64 {
    let u: f64 = stream_rng(seed, W_BASE, r as u64).random();
    ((r as f64 + u) / n as f64).min(1.0 - f64::EPSILON)
}

/// Per-realization samples of `w`, `Tr G` and the `Im M` identity.
///
/// Realization `r` draws its own disorder and a base point uniform in the
/// unit cell, so the average is over the translation-invariant (suspended)
/// process rather than over the cell-boundary point alone. Equal `seed`
/// reproduces the same realizations for every `z`.
pub fn w_samples(
    spec: &DisorderSpec,
    z: ComplexEnergy,
    l_w: usize,
    n_realizations: usize,
    seed: u64,
) -> Result<Vec<WSample>> {
    check_window(l_w)?;
    if n_realizations == 0 {
        return Err(Error::Domain("need at least one realization".into()));
    }
    spec.validate()?;
    par::map_range(n_realizations, |r| {
        let m =
            m_functions(spec, derive_seed(seed, W_REALIZATION, r as u64), z, l_w, base_point(seed, r, n_realizations))?;
        Ok(WSample {
            w: m.half_trace(),
            green_trace: m.green()?.trace(),
            im_inverse: im_inverse_trace(&m.m_plus)? * z.a / 2.0,
        })
    })
    .into_iter()
    .collect()
}

fn complex_mean_se(xs: &[Complex64]) -> (Complex64, (f64, f64)) {
    let re: Vec<f64> = xs.iter().map(|c| c.re).collect();
    let im: Vec<f64> = xs.iter().map(|c| c.im).collect();
    let (mr, sr) = mean_se(&re);
    let (mi, si) = mean_se(&im);
    (Complex64::new(mr, mi), (sr, si))
}

pub fn w_estimate(
    spec: &DisorderSpec,
    z: ComplexEnergy,
    l_w: usize,
    n_realizations: usize,
    seed: u64,
) -> Result<WValue> {
    let samples = w_samples(spec, z, l_w, n_realizations, seed)?;
    let ws: Vec<Complex64> = samples.iter().map(|s| s.w).collect();
    let gs: Vec<Complex64> = samples.iter().map(|s| s.green_trace).collect();
    let ims: Vec<f64> = samples.iter().map(|s| s.im_inverse).collect();
    let (w, w_se) = complex_mean_se(&ws);
    let (green_trace, green_se) = complex_mean_se(&gs);
    let (im_inverse, im_inverse_se) = mean_se(&ims);
    Ok(WValue {
        z,
        w,
        w_se,
        green_trace,
        green_se,
        im_inverse,
        im_inverse_se,
        truncation_length: l_w,
        realizations: n_realizations,
        herglotz_violations: samples.iter().filter(|s| s.w.im <= 0.0 || s.green_trace.im <= 0.0).count(),
        min_im_w: ws.iter().map(|c| c.im).fold(f64::INFINITY, f64::min),
        min_im_green: gs.iter().map(|c| c.im).fold(f64::INFINITY, f64::min),
    })
}

/// Centred difference of `w` against `𝔼 Tr G`, with common realizations.
#[derive(Clone, Copy, Debug)]
pub struct DerivativeCheck {
    pub finite_difference: Complex64,
    pub green_trace: Complex64,
    pub relative_error: f64,
    /// Standard error of `|w' - Tr G|` from per-realization differences.
    pub difference_se: f64,
}

pub fn derivative_check(
    spec: &DisorderSpec,
    z: ComplexEnergy,
    step: f64,
    l_w: usize,
    n_realizations: usize,
    seed: u64,
) -> Result<DerivativeCheck> {
    if !(step > 0.0 && step < z.a) {
        return Err(Error::Domain(format!("step {step} must lie in (0, Im z)")));
    }
    let centre = w_samples(spec, z, l_w, n_realizations, seed)?;
    let up = w_samples(spec, ComplexEnergy::new(z.e + step, z.a)?, l_w, n_realizations, seed)?;
    let down = w_samples(spec, ComplexEnergy::new(z.e - step, z.a)?, l_w, n_realizations, seed)?;
    let diffs: Vec<Complex64> = (0..n_realizations).map(|r| (up[r].w - down[r].w) / (2.0 * step)).collect();
    let greens: Vec<Complex64> = centre.iter().map(|s| s.green_trace).collect();
    let (fd, _) = complex_mean_se(&diffs);
    let (g, _) = complex_mean_se(&greens);
    let gaps: Vec<Complex64> = diffs.iter().zip(&greens).map(|(d, g)| d - g).collect();
    let (_, (sr, si)) = complex_mean_se(&gaps);
    Ok(DerivativeCheck {
        finite_difference: fd,
        green_trace: g,
        relative_error: (fd - g).norm() / g.norm(),
        difference_se: sr.hypot(si),
    })
}

/// Chain average of `w` and `Tr G` along one long realization.
#[derive(Clone, Copy, Debug)]
pub struct ErgodicW {
    pub w: Complex64,
    pub w_se: (f64, f64),
    pub green_trace: Complex64,
    pub green_se: (f64, f64),
    /// Evaluation points used (cells times offsets).
    pub points: usize,
}

/// Ergodic estimate of `w(z)` and `𝔼 Tr G_z(0, 0)` from a single chain of
/// `n_cells` cells.
///
/// One backward sweep from a Dirichlet wall at the right end yields `M₊` at
/// every point `k + u_j` (offsets `u_j = (j + ½)/offsets`), one forward sweep
/// yields `M₋`; points within `burn_in` cells of either wall are discarded.
/// Averaging over cells and offsets approximates the translation-invariant
/// mean with `O(1)` work per point, which makes precisions far beyond the
/// reach of independent-realization sampling affordable. Standard errors are
/// batch means over 20 contiguous blocks.
pub fn w_ergodic(
    spec: &DisorderSpec,
    z: ComplexEnergy,
    n_cells: usize,
    burn_in: usize,
    offsets: usize,
    seed: u64,
) -> Result<ErgodicW> {
    if offsets == 0 || n_cells < 2 * burn_in + crate::lyapunov::MIN_BATCHES {
        return Err(Error::Domain(format!(
            "chain of {n_cells} cells too short for burn-in {burn_in} and {offsets} offsets"
        )));
    }
    let r = Realization::new(spec, seed)?;
    let n = spec.channels;
    let zc = z.z();
    let us: Vec<f64> = (0..offsets).map(|j| (j as f64 + 0.5) / offsets as f64).collect();
    let total = n_cells as i64;
    let (lo, hi) = (burn_in as i64, total - burn_in as i64);
    let wall = |sign: f64| {
        let mut f = DMatrix::<Complex64>::zeros(2 * n, n);
        for c in 0..n {
            f[(n + c, c)] = Complex64::new(sign, 0.0);
        }
        f
    };
    let mut plus: Vec<DMatrix<Complex64>> = Vec::with_capacity(((hi - lo) as usize) * offsets);
    let mut frame = wall(-1.0);
    for k in (0..total).rev() {
        let cell = r.cell(k);
        if (lo..hi).contains(&k) {
            for &u in us.iter().rev() {
                let f = transfer_between_complex(&cell, zc, 1.0, u) * &frame;
                plus.push(log_derivative(&f, "M+", n_cells)?);
            }
        }
        frame = renormalize(cell_transfer_complex_backward(&cell, zc) * frame);
    }
    plus.reverse();
    let mut ws = Vec::with_capacity(plus.len());
    let mut gs = Vec::with_capacity(plus.len());
    let mut frame = wall(1.0);
    let mut idx = 0;
    for k in 0..total {
        let cell = r.cell(k);
        if (lo..hi).contains(&k) {
            for &u in &us {
                let f = transfer_between_complex(&cell, zc, 0.0, u) * &frame;
                let m_minus = -log_derivative(&f, "M-", n_cells)?;
                let m_plus = &plus[idx];
                idx += 1;
                ws.push((m_plus.trace() + m_minus.trace()) * 0.5);
                gs.push(green_at_zero(m_plus, &m_minus)?.trace());
            }
        }
        frame = renormalize(cell_transfer_complex(&cell, zc) * frame);
    }
    let (w, w_se) = batch_mean_se(&ws);
    let (green_trace, green_se) = batch_mean_se(&gs);
    Ok(ErgodicW { w, w_se, green_trace, green_se, points: ws.len() })
}

fn batch_mean_se(xs: &[Complex64]) -> (Complex64, (f64, f64)) {
    let b = crate::lyapunov::MIN_BATCHES;
    let means: Vec<Complex64> = (0..b)
        .map(|i| {
            let chunk = &xs[i * xs.len() / b..(i + 1) * xs.len() / b];
            chunk.iter().sum::<Complex64>() / chunk.len() as f64
        })
        .collect();
    let (_, se) = complex_mean_se(&means);
    (xs.iter().sum::<Complex64>() / xs.len() as f64, se)
}

/// `∫ dN(E') / (E' - z)` from an IDS table plus the free tail beyond it.
///
/// Increments are placed at midpoints of grid steps as in
/// [`crate::ids::laplace_of_ids`].
pub fn stieltjes_of_ids(table: &IdsTable, z: Complex64) -> Complex64 {
    let e = &table.energies;
    let n = &table.counts_per_volume;
    let mut acc = n[0] / (e[0] - z);
    for k in 1..e.len() {
        let mid = 0.5 * (e[k - 1] + e[k]);
        acc += (n[k] - n[k - 1]) / (mid - z);
    }
    let top = e[e.len() - 1];
    if table.channels == 0 || top <= 0.0 {
        return acc;
    }
    // s = E^{-1/2}: channels/(2π√E) dE/(E - z) = (channels/π) ds / (1 - z s²)
    let smax = top.powf(-0.5);
    let scale = table.channels as f64 / std::f64::consts::PI;
    let re = simpson(|s| (1.0 / (1.0 - z * s * s)).re, 0.0, smax, 2000);
    let im = simpson(|s| (1.0 / (1.0 - z * s * s)).im, 0.0, smax, 2000);
    acc + Complex64::new(re, im) * scale
}

/// Polynomial extrapolation of samples at `a_k` to `a = 0`.
pub fn extrapolate_in_a(a: &[f64], values: &[f64]) -> f64 {
    let degree = if a.len() >= 4 { 2 } else { a.len().saturating_sub(1).min(1) };
    crate::stats::extrapolate_to_zero(a, values, degree)
}
