use num_complex::Complex64;
use proptest::prelude::*;
use strip_anderson::green::{
    green_at_zero, m_functions, m_minus, m_plus, stieltjes_of_ids, w_ergodic, w_estimate, ComplexEnergy,
};
use strip_anderson::ids::{ids_table, Boundary};
use strip_anderson::model::{model2_preset, DisorderSpec};

#[test]
fn stieltjes_consistency() {
    let spec = model2_preset();
    let z = ComplexEnergy::new(1.5, 0.5).unwrap();
    let chain = w_ergodic(&spec, z, 100_000, 200, 8, 5).unwrap();
    let energies: Vec<f64> = (0..=4150).map(|k| -1.5 + 0.01 * k as f64).collect();
    let table = ids_table(&spec, 6, 1000, 0.01, &energies, Boundary::Dirichlet).unwrap();
    let s = stieltjes_of_ids(&table, z.z());
    let gap = (chain.green_trace - s).norm();
    let budget = 3.0 * chain.green_se.0.hypot(chain.green_se.1) + 0.01 * s.norm();
    assert!(gap <= budget, "{} vs {s}: gap {gap} > {budget}", chain.green_trace);
}

#[test]
fn herglotz_triple() {
    let spec = model2_preset();
    let h = 1e-4;
    for (e, a) in [(1.0, 0.5), (3.0, 0.3), (-1.0, 1.0)] {
        let z = ComplexEnergy::new(e, a).unwrap();
        let w = w_estimate(&spec, z, 50, 100, 2).unwrap();
        assert!(w.w.im > 0.0, "Im w at {e}+{a}i");
        assert!((Complex64::new(0.0, -1.0) * w.w).im > 0.0, "Im(-i w) at {e}+{a}i");
        let up = w_ergodic(&spec, ComplexEnergy::new(e + h, a).unwrap(), 20_000, 100, 8, 1).unwrap();
        let dn = w_ergodic(&spec, ComplexEnergy::new(e - h, a).unwrap(), 20_000, 100, 8, 1).unwrap();
        assert!(((up.w - dn.w) / (2.0 * h)).im > 0.0, "Im w' at {e}+{a}i");
    }
}

#[test]
fn im_inverse_identity_on_average() {
    let spec = model2_preset();
    let w = w_estimate(&spec, ComplexEnergy::new(1.0, 1.0).unwrap(), 50, 400, 4).unwrap();
    let gap = (w.im_inverse + w.w.re).abs();
    assert!(gap <= 3.0 * (w.im_inverse_se + w.w_se.0), "{} vs {}", w.im_inverse, -w.w.re);
}

#[test]
fn window_stability_rate() {
    let spec = model2_preset();
    let z = ComplexEnergy::new(-0.5, 0.4).unwrap();
    let a = m_plus(&spec, 3, z, 20).unwrap();
    let b = m_plus(&spec, 3, z, 40).unwrap();
    // Below the spectrum the decay rate is at least √(0.5) per cell.
    assert!((a - b).norm() < (-0.5f64.sqrt() * 20.0).exp());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_potential_closed_forms(c in -1.0f64..3.0, e in -2.0f64..5.0, a in 0.3f64..2.0) {
        let spec = DisorderSpec::constant_scalar(c);
        let z = ComplexEnergy::new(e, a).unwrap();
        let k = (Complex64::new(c, 0.0) - z.z()).sqrt();
        let mp = m_plus(&spec, 0, z, 120).unwrap()[(0, 0)];
        let mm = m_minus(&spec, 0, z, 120).unwrap()[(0, 0)];
        prop_assert!((mp + k).norm() < 1e-8);
        prop_assert!((mm + k).norm() < 1e-8);
        let m = m_functions(&spec, 0, z, 120, 0.0).unwrap();
        let g = green_at_zero(&m.m_plus, &m.m_minus).unwrap()[(0, 0)];
        prop_assert!((g - 1.0 / (2.0 * k)).norm() < 1e-8);
    }

    #[test]
    fn herglotz_per_realization(seed in 0u64..10_000, e in -1.0f64..6.0, a in 0.05f64..1.0, u in 0.0f64..1.0) {
        let m = m_functions(&model2_preset(), seed, ComplexEnergy::new(e, a).unwrap(), 50, u.min(0.999)).unwrap();
        prop_assert!(m.m_plus.trace().im > 0.0);
        prop_assert!(m.m_minus.trace().im > 0.0);
        prop_assert!(m.green().unwrap().trace().im > 0.0);
    }
}
