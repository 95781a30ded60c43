use std::f64::consts::PI;

use proptest::prelude::*;
use strip_anderson::ids::{ids_table, Boundary, IdsTable};
use strip_anderson::model::{model2_preset, DisorderSpec};
use strip_anderson::thouless::{hilbert, thouless_fit, thouless_rhs};

fn symmetric_grid(half: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| -half + 2.0 * half * k as f64 / (n - 1) as f64).collect()
}

#[test]
fn reflection_invariance() {
    // ñ(E') = n(-E'), i.e. Ñ(E') = total - N(-E'), on a grid symmetric about 0.
    let grid = symmetric_grid(5.0, 501);
    let n: Vec<f64> = grid.iter().map(|&e| 0.5 * (1.0 + (e - 0.8).tanh()) + 0.1 * (e / 2.0).sin().powi(2)).collect();
    let total = n[n.len() - 1];
    let reflected: Vec<f64> = n.iter().rev().map(|v| total - v).collect();
    // The reflected measure has no atom at the bottom: shift mass so it starts at 0.
    let a = IdsTable::from_values(grid.clone(), n.iter().map(|v| v - n[0]).collect(), 0).unwrap();
    let b = IdsTable::from_values(grid.clone(), reflected.iter().map(|v| v - reflected[0]).collect(), 0).unwrap();
    for e in [-2.3, -0.4, 0.0, 1.7] {
        let lhs = thouless_rhs(&a, e).unwrap();
        let rhs = thouless_rhs(&b, -e).unwrap();
        assert!((lhs - rhs).abs() < 1e-10, "E={e}: {lhs} vs {rhs}");
    }
}

#[test]
fn tail_correction_is_adequate() {
    let spec = model2_preset();
    let short: Vec<f64> = (0..=2150).map(|k| -1.5 + 0.01 * k as f64).collect();
    let long: Vec<f64> = (0..=4150).map(|k| -1.5 + 0.01 * k as f64).collect();
    let a = ids_table(&spec, 2, 300, 0.01, &short, Boundary::Dirichlet).unwrap();
    let b = ids_table(&spec, 2, 300, 0.01, &long, Boundary::Dirichlet).unwrap();
    for e in [0.5, 3.0, 3.5, 6.0] {
        let d = (thouless_rhs(&a, e).unwrap() - thouless_rhs(&b, e).unwrap()).abs();
        assert!(d < 1e-3, "E={e}: {d}");
    }
}

#[test]
fn free_scalar_from_box_counts() {
    let free = DisorderSpec::constant_scalar(0.0);
    let grid: Vec<f64> = (0..=3000).map(|k| -5.0 + 0.01 * k as f64).collect();
    let table = ids_table(&free, 0, 100, 0.01, &grid, Boundary::Neumann).unwrap();
    let es: Vec<f64> = (0..=16).map(|k| -4.0 + 0.5 * k as f64).filter(|e: &f64| e.abs() > 0.2).collect();
    let gamma: Vec<f64> = es.iter().map(|&e| (-e).max(0.0).sqrt()).collect();
    let fit = thouless_fit(&es, &gamma, &table).unwrap();
    assert!(fit.rms < 2e-2);
    assert!((fit.alpha + 0.5f64.sqrt()).abs() < 2e-2);
}

fn smooth_bump(x: f64, c: f64, w: f64) -> f64 {
    let y = (x - c) / w;
    if y.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - y * y)).exp()
    }
}

#[test]
fn hilbert_of_odd_function_is_even() {
    let h = 1e-2;
    let xs: Vec<f64> = (0..=2000).map(|k| (k as f64 - 1000.0) * h).collect();
    let psi: Vec<f64> = xs.iter().map(|&x| smooth_bump(x, 1.0, 0.8) - smooth_bump(x, -1.0, 0.8)).collect();
    let t = hilbert(&psi);
    for k in 0..1000 {
        assert!((t[k] - t[2000 - k]).abs() < 1e-12);
    }
}

#[test]
fn hilbert_of_cosine_bump_matches_quadrature() {
    // Reference by adaptive-free Simpson with the singularity subtracted.
    let h = 1e-3;
    let m = 3000;
    let xs: Vec<f64> = (0..=2 * m).map(|k| (k as f64 - m as f64) * h).collect();
    let f = |x: f64| if x.abs() < 1.0 { (PI * x / 2.0).cos().powi(2) } else { 0.0 };
    let psi: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let t = hilbert(&psi);
    for &i in &[m / 2, m, m + 700, m + 1600] {
        let x = xs[i];
        // (1/π) ∫_{-1}^{1} (f(s) - f(x))/(x - s) ds + f(x)/π log|(x+1)/(x-1)|
        let nq = 20_000;
        let g = |s: f64| if (s - x).abs() < 1e-12 { 0.0 } else { (f(s) - f(x)) / (x - s) };
        let hq = 2.0 / nq as f64;
        let mut acc = g(-1.0) + g(1.0);
        for k in 1..nq {
            acc += g(-1.0 + k as f64 * hq) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let mut want = acc * hq / 3.0 / PI;
        if x.abs() != 1.0 {
            want += f(x) / PI * ((x + 1.0) / (x - 1.0)).abs().ln();
        }
        assert!((t[i] - want).abs() < 1e-4, "x={x}: {} vs {want}", t[i]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn t_squared_is_minus_identity(c in -1.0f64..1.0, w in 0.5f64..2.0, amp in -2.0f64..2.0) {
        let h = 2e-3;
        let m = 25_000;
        let xs: Vec<f64> = (0..=2 * m).map(|k| (k as f64 - m as f64) * h).collect();
        let psi: Vec<f64> = xs.iter().map(|&x| amp * smooth_bump(x, c, w)).collect();
        let tt = hilbert(&hilbert(&psi));
        let (mut acc, mut cnt) = (0.0, 0);
        for (k, &x) in xs.iter().enumerate() {
            if (x - c).abs() < w + 0.5 {
                acc += (tt[k] + psi[k]).powi(2);
                cnt += 1;
            }
        }
        prop_assert!((acc / cnt as f64).sqrt() < 1e-2 * amp.abs().max(0.1));
    }
}
