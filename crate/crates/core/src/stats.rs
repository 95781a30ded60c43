//! Sample statistics used across estimators.

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    LinearFit { slope, intercept, r2 }
}

/// Composite Simpson rule on `[a, b]` with `2 * half_panels` subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, half_panels: usize) -> f64 {
    let m = 2 * half_panels.max(1);
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Value at 0 of the polynomial of degree `degree` fitted by least squares
/// to `(xs, ys)`; the Richardson-style extrapolation used for `a -> 0`.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64], degree: usize) -> f64 {
    use nalgebra::{DMatrix, DVector};
    let cols = degree + 1;
    let design = DMatrix::from_fn(xs.len(), cols, |i, j| xs[i].powi(j as i32));
    let rhs = DVector::from_column_slice(ys);
    let sol = design.svd(true, true).solve(&rhs, 1e-14).expect("svd solve");
    sol[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_small() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0_f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn fit_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = linear_fit(&xs, &ys);
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_cubic_exact() {
        let v = simpson(|x| x * x * x - x, 0.0, 2.0, 1);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn extrapolation_recovers_quadratic() {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|a| 1.5 - 2.0 * a + 0.7 * a * a).collect();
        assert!((extrapolate_to_zero(&xs, &ys, 2) - 1.5).abs() < 1e-12);
    }
}
