//! Acceptance checks, one line per criterion.
//!
//! Run with `cargo test -p strip-anderson-core --test acceptance`. The binary
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use strip_anderson::green::{derivative_check, extrapolate_in_a, w_ergodic, w_estimate, ComplexEnergy};
use strip_anderson::ids::{feynman_kac_laplace, ids_table, laplace_of_ids, Boundary};
use strip_anderson::lyapunov::{lyapunov_spectrum, lyapunov_sweep};
use strip_anderson::model::{model2_preset, model2_with, sample_cell, DisorderSpec, Distribution};
use strip_anderson::par;
use strip_anderson::regularity::{check_bounds, hoelder_exponent, lie_algebra_rank, sp_basis, span_closure};
use strip_anderson::thouless::{hilbert, thouless_fit};
use strip_anderson::transfer::{cell_transfer, symplectic_residual};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn dirac0() -> DisorderSpec {
    model2_with(Distribution::Dirac { value: 0.0 })
}

fn free_channel_ids(e: f64) -> f64 {
    ((e + 1.0).max(0.0).sqrt() + (e - 1.0).max(0.0).sqrt()) / PI
}

fn criterion_1() -> Outcome {
    let energies = grid(1.5, 5.0, 71);
    let mut with_three = energies.clone();
    with_three.push(3.0);
    with_three.sort_by(f64::total_cmp);
    with_three.dedup();
    let table = ids_table(&dirac0(), 0, 100, 0.01, &with_three, Boundary::Dirichlet).unwrap();
    let n3 = table.value_at(3.0);
    let want3 = (2.0 + 2f64.sqrt()) / PI;
    let rel3 = (n3 - want3).abs() / want3;
    let worst = energies
        .iter()
        .map(|&e| (table.value_at(e) - free_channel_ids(e)).abs() / free_channel_ids(e))
        .fold(0.0, f64::max);
    outcome(
        rel3 < 0.02 && worst < 0.02,
        format!("N(3) = {n3:.5} vs {want3:.5} (rel {rel3:.2e}); worst rel on [1.5,5] = {worst:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let spec = dirac0();
    let s0 = lyapunov_spectrum(&spec, 0.0, 10_000, 1, 1).unwrap();
    let s3 = lyapunov_spectrum(&spec, 3.0, 10_000, 1, 1).unwrap();
    let want = [1.0, 0.0, 0.0, -1.0];
    let err0 = s0.exponents.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    let err3 = s3.exponents.iter().map(|g| g.abs()).fold(0.0, f64::max);
    outcome(err0 < 1e-2 && err3 < 1e-2, format!("E=0 max err {err0:.2e}; E=3 max |γ| {err3:.2e}"))
}

fn criterion_3() -> Outcome {
    let spec = model2_preset();
    let energies = grid(-2.0, 10.0, 50);
    let worst = (0..10_000i64)
        .map(|n| {
            let cell = sample_cell(&spec, 3, n).unwrap();
            energies.iter().map(|&e| symplectic_residual(cell_transfer(&cell, e).matrix())).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let mut pairs_ok = true;
    let mut pair_detail = Vec::new();
    for e in [0.5, 3.0, 4.5] {
        let s = lyapunov_spectrum(&spec, e, 100_000, 5, 1).unwrap();
        for i in 0..2 {
            let (sum, se) = s.pair_sum(i);
            pairs_ok &= sum.abs() <= 3.0 * se;
            pair_detail.push(format!("E={e} i={}: {:.1}SE", i + 1, sum.abs() / se));
        }
    }
    outcome(worst <= 1e-10 && pairs_ok, format!("max residual {worst:.2e}; pair sums {}", pair_detail.join(", ")))
}

fn criterion_4() -> Outcome {
    let free = feynman_kac_laplace(&DisorderSpec::constant_scalar(0.0), 1.0, 10_000, 1e-2, 1).unwrap();
    let want = 1.0 / (4.0 * PI).sqrt();
    let ok_a = (free.value - want).abs() <= 3.0 * free.mc_standard_error + 1e-12;

    let spec = model2_preset();
    let fk = feynman_kac_laplace(&spec, 1.0, 10_000, 1e-2, 2).unwrap();
    let energies = grid(-1.5, 40.0, 2076);
    let table = ids_table(&spec, 17, 400, 0.01, &energies, Boundary::Dirichlet).unwrap();
    let lap = laplace_of_ids(&table, 1.0).unwrap();
    let gap = (fk.value - lap).abs();
    let budget = 3.0 * fk.mc_standard_error + 0.03 * lap;
    outcome(
        ok_a && gap <= budget,
        format!(
            "(a) {:.6} vs {want:.6}, SE {:.1e}; (b) FK {:.5} ± {:.1e} vs IDS {lap:.5}, gap {gap:.2e} <= {budget:.2e}",
            free.value, free.mc_standard_error, fk.value, fk.mc_standard_error
        ),
    )
}

fn criterion_5() -> Outcome {
    let spec = model2_preset();
    let (l_w, reps, seed) = (50, 200, 7);
    let z = ComplexEnergy::new(3.0, 0.1).unwrap();
    let w = w_estimate(&spec, z, l_w, reps, seed).unwrap();
    let herglotz = w.herglotz_violations == 0;

    let a_values = [0.4, 0.2, 0.1, 0.05];
    let ws: Vec<_> = a_values
        .iter()
        .map(|&a| w_estimate(&spec, ComplexEnergy::new(3.0, a).unwrap(), l_w, reps, seed).unwrap())
        .collect();
    let re0 = -extrapolate_in_a(&a_values, &ws.iter().map(|v| v.w.re).collect::<Vec<_>>());
    let im0 = extrapolate_in_a(&a_values, &ws.iter().map(|v| v.w.im).collect::<Vec<_>>());

    let gamma = lyapunov_spectrum(&spec, 3.0, 1_000_000, 11, 20).unwrap().partial_sum(2).0;
    let table = ids_table(&spec, 13, 2000, 0.01, &[3.0, 3.01], Boundary::Dirichlet).unwrap();
    let pi_n = PI * table.value_at(3.0);
    let rel_re = (re0 - gamma).abs() / gamma.abs();
    let rel_im = (im0 - pi_n).abs() / pi_n;

    let d = derivative_check(&spec, z, 1e-4, l_w, reps, seed).unwrap();

    // Supplementary, not gating: the same identities from single long chains.
    let chain = |e: f64, a: f64, offsets: usize, cells: usize| {
        w_ergodic(&spec, ComplexEnergy::new(e, a).unwrap(), cells, 500, offsets, 3).unwrap()
    };
    let erg: Vec<_> = par::map_slice(&a_values, |&a| chain(3.0, a, 4, 400_000));
    let erg_re = -extrapolate_in_a(&a_values, &erg.iter().map(|v| v.w.re).collect::<Vec<_>>());
    let erg_im = extrapolate_in_a(&a_values, &erg.iter().map(|v| v.w.im).collect::<Vec<_>>());
    let h = 1e-4;
    let fd_runs: Vec<_> = par::map_slice(&[3.0 + h, 3.0 - h, 3.0], |&e| chain(e, 0.1, 16, 100_000));
    let erg_fd = (fd_runs[0].w - fd_runs[1].w) / (2.0 * h);
    let erg_rel = (erg_fd - fd_runs[2].green_trace).norm() / fd_runs[2].green_trace.norm();

    outcome(
        herglotz && rel_re < 0.05 && rel_im < 0.05 && d.relative_error < 1e-3,
        format!(
            "Herglotz violations {} (min Im w {:.3e}, min Im TrG {:.3e}); -Re w(3+i0) {re0:.4} vs γ1+γ2 {gamma:.4} (rel {rel_re:.2e}); \
             Im w {im0:.4} vs πN(3) {pi_n:.4} (rel {rel_im:.2e}); w' {} vs E TrG {} (rel {:.2e}, SE of gap {:.1e}) \
             | ergodic chain: -Re w {erg_re:.5} (rel {:.2e}), Im w {erg_im:.4} (rel {:.2e}), w' vs E TrG rel {erg_rel:.1e}",
            w.herglotz_violations, w.min_im_w, w.min_im_green, fmt_c(d.finite_difference), fmt_c(d.green_trace),
            d.relative_error, d.difference_se, (erg_re - gamma).abs() / gamma, (erg_im - pi_n).abs() / pi_n
        ),
    )
}

fn fmt_c(c: Complex64) -> String {
    format!("{:.4}{:+.4}i", c.re, c.im)
}

fn criterion_6() -> Outcome {
    let free = DisorderSpec::constant_scalar(0.0);
    let table = ids_table(&free, 0, 100, 0.01, &grid(-6.0, 40.0, 4601), Boundary::Dirichlet).unwrap();
    let es: Vec<f64> = grid(-4.0, 4.0, 81).into_iter().filter(|e| e.abs() >= 0.2 - 1e-12).collect();
    let gamma: Vec<f64> = es.iter().map(|&e| (-e).max(0.0).sqrt()).collect();
    let fit_free = thouless_fit(&es, &gamma, &table).unwrap();

    let spec = model2_preset();
    let es2 = grid(3.0, 4.0, 40);
    let sweep = lyapunov_sweep(&spec, &es2, 200_000, 21, 20).unwrap();
    let gamma2: Vec<f64> = sweep.iter().map(|s| s.partial_sum(2).0).collect();
    let table2 = ids_table(&spec, 23, 1000, 0.01, &grid(-1.5, 40.0, 4151), Boundary::Dirichlet).unwrap();
    let fit2 = thouless_fit(&es2, &gamma2, &table2).unwrap();
    let w_i = w_estimate(&spec, ComplexEnergy::new(0.0, 1.0).unwrap(), 50, 200, 29).unwrap();
    outcome(
        fit_free.rms < 2e-2 && fit2.rms < 5e-2,
        format!(
            "free rms {:.2e} (α̂ {:.4}, Re w(i) = -1/√2); model2 rms {:.2e}, α̂ {:.4} vs Re w(i) {:.4} ± {:.1e}",
            fit_free.rms, fit_free.alpha, fit2.rms, fit2.alpha, w_i.w.re, w_i.w_se.0
        ),
    )
}

fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

fn criterion_7() -> Outcome {
    let h = 1e-3;
    let m = 50_000;
    let xs: Vec<f64> = (0..=2 * m).map(|k| (k as f64 - m as f64) * h).collect();
    let tests: Vec<Box<dyn Fn(f64) -> f64>> =
        vec![Box::new(bump), Box::new(|x| bump(x - 0.3) * (3.0 * x).sin()), Box::new(|x| bump(x / 2.0) * x)];
    let mut worst_rms = 0.0_f64;
    for f in &tests {
        let psi: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let tt = hilbert(&hilbert(&psi));
        let (mut acc, mut cnt) = (0.0, 0);
        for (k, &x) in xs.iter().enumerate() {
            if x.abs() <= 3.0 {
                acc += (tt[k] + psi[k]).powi(2);
                cnt += 1;
            }
        }
        worst_rms = worst_rms.max((acc / cnt as f64).sqrt());
    }
    let ind: Vec<f64> = xs
        .iter()
        .map(|&x| match (x.abs() - 1.0) / h {
            d if d < -0.5 => 1.0,
            d if d <= 0.5 => 0.5,
            _ => 0.0,
        })
        .collect();
    let t = hilbert(&ind);
    let worst_ind = xs
        .iter()
        .zip(&t)
        .filter(|(x, _)| (x.abs() - 1.0).abs() > 5.0 * h && x.abs() < 10.0)
        .map(|(x, v)| (v - ((x + 1.0) / (x - 1.0)).abs().ln() / PI).abs())
        .fold(0.0, f64::max);
    outcome(
        worst_rms < 1e-2 && worst_ind < 1e-2,
        format!("T²+I rms {worst_rms:.2e}; indicator max err {worst_ind:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let n = 1025;
    let xs = grid(-1.0, 1.0, n);
    let synth = hoelder_exponent(&xs.iter().map(|x| x.abs().sqrt()).collect::<Vec<_>>(), (-1.0, 1.0)).unwrap();

    let spec = model2_preset();
    let es = grid(3.0, 4.0, n);
    let table = ids_table(&spec, 31, 1000, 0.01, &es, Boundary::Dirichlet).unwrap();
    let h_ids = hoelder_exponent(&table.counts_per_volume, (3.0, 4.0)).unwrap();
    let es_g = grid(3.0, 4.0, 129);
    let sweep = lyapunov_sweep(&spec, &es_g, 50_000, 37, 20).unwrap();
    let gamma: Vec<f64> = sweep.iter().map(|s| s.partial_sum(2).0).collect();
    let h_g = hoelder_exponent(&gamma, (3.0, 4.0)).unwrap();
    let ok = (synth.alpha_hat - 0.5).abs() <= 0.05
        && h_ids.alpha_hat > 0.1
        && h_ids.regression_r2 > 0.8
        && h_g.alpha_hat > 0.1
        && h_g.regression_r2 > 0.8;
    outcome(
        ok,
        format!(
            "|x|^½: {:.3}; N(E): α̂ {:.3} r² {:.3}; γ-sum: α̂ {:.3} r² {:.3}",
            synth.alpha_hat, h_ids.alpha_hat, h_ids.regression_r2, h_g.alpha_hat, h_g.regression_r2
        ),
    )
}

fn criterion_9() -> Outcome {
    match check_bounds(&model2_preset(), (2.5, 4.5), 1000, 41) {
        Ok(r) => outcome(
            r.max_growth_ratio <= 1.0 && r.max_lipschitz_ratio <= 1.0,
            format!("max growth ratio {:.3}, max Lipschitz ratio {:.3e}", r.max_growth_ratio, r.max_lipschitz_ratio),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_10() -> Outcome {
    let synth = span_closure(&sp_basis(2), 1e-8);
    let r = lie_algebra_rank(&model2_preset(), 3.0, 10_000, 1e-8, 43).unwrap();
    outcome(
        synth == 10 && r.dimension == 10,
        format!(
            "synthetic {synth}/10; model2 E=3: {}/{} from {} generators ({} distinct transfers, min power {:?})",
            r.dimension,
            r.target,
            r.generators.len(),
            r.distinct_transfers,
            r.min_power_used
        ),
    )
}

fn criterion_11() -> Outcome {
    let spec = model2_preset();
    let es = grid(0.0, 5.0, 501);
    let sup = |l: usize| {
        let d = ids_table(&spec, 47, l, 0.01, &es, Boundary::Dirichlet).unwrap();
        let n = ids_table(&spec, 47, l, 0.01, &es, Boundary::Neumann).unwrap();
        d.counts_per_volume.iter().zip(&n.counts_per_volume).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (s100, s50) = (sup(100), sup(50));
    outcome(s100 < 2.0 * s50, format!("sup|N_D - N_N|: L=100 {s100:.4e}, L=50 {s50:.4e}, ratio {:.3}", s100 / s50))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("free-channel IDS oracle", criterion_1),
        ("deterministic Lyapunov oracle", criterion_2),
        ("symplectic residual and exponent pairing", criterion_3),
        ("Feynman-Kac cross-check", criterion_4),
        ("Kotani identities", criterion_5),
        ("Thouless relation", criterion_6),
        ("Hilbert transform", criterion_7),
        ("Hoelder diagnostics", criterion_8),
        ("transfer-matrix bounds", criterion_9),
        ("Lie-algebra rank", criterion_10),
        ("boundary-condition independence", criterion_11),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2} {name}: {} ({:.1}s)", i + 1, o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {failed} failing");
    if failed > 0 {
        std::process::exit(1);
    }
}
