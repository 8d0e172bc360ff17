use exwkb::SectorLabel::*;
use exwkb::*;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sorted_tps(pot: &RationalPotential, e: Complex64, hbar: f64) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = build_effective_q(pot, e, hbar).unwrap().find_turning_points().unwrap().iter().map(|t| t.location).collect();
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn turning_points_ignore_a_common_factor(k in 0.1f64..10.0, e in -0.9f64..0.9, hbar in 0.05f64..0.5) {
        let base = RationalPotential::double_hump();
        let scaled = RationalPotential::new(
            Poly::from_real(&[-k, 0.0, k]),
            Poly::from_real(&[k, 0.0, 2.0 * k, 0.0, k]),
            None,
        ).unwrap();
        let e = c(e, 0.01);
        for (a, b) in sorted_tps(&base, e, hbar).iter().zip(sorted_tps(&scaled, e, hbar)) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn reversed_paths_negate_the_action(
        x0 in -2.0f64..2.0, y0 in 0.3f64..2.0, x1 in -2.0f64..2.0, y1 in 0.3f64..2.0, e in 0.5f64..3.0,
    ) {
        // harmonic turning points are real, so paths in the upper half plane are safe
        let q = build_effective_q(&RationalPotential::harmonic(), c(e, 0.0), 1.0).unwrap();
        let (a, b) = (c(x0, y0), c(x1, y1));
        let fwd = track_branch(&q, &[a, b], q.qt(a).sqrt()).unwrap();
        let (w1, _) = action_integral(&q, &fwd).unwrap();
        let (w2, _) = action_integral(&q, &fwd.reversed()).unwrap();
        prop_assert!((w1 + w2).norm() < 1e-11 * (1.0 + w1.norm()));
    }

    #[test]
    fn coulomb_levels_scale_with_alpha_squared(alpha in 0.5f64..3.0, l in 0u32..2) {
        let levels = coulomb_levels(alpha, l, 1.0, 1).unwrap();
        for (k, r) in levels.iter().enumerate() {
            let n = (k as u32 + l + 1) as f64;
            let want = -alpha * alpha / (4.0 * n * n);
            prop_assert!((r.energy.re / want - 1.0).abs() < 1e-9, "{} vs {want}", r.energy.re);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn scattering_conserves_flux(e in prop_oneof![0.01f64..0.06, 0.25f64..1.5]) {
        let s = barrier_amplitudes(&RationalPotential::double_hump(), 0.1, e, Mode::Exact).unwrap();
        prop_assert!(s.unitarity_defect <= 1e-6, "E = {e}: {}", s.unitarity_defect);
    }

    #[test]
    fn reciprocal_identity_holds_in_the_bound_regime(e in -0.9f64..-0.1) {
        let q = build_effective_q(&RationalPotential::double_hump(), c(e, 0.0), 0.4).unwrap();
        let s = Solver::new(&q).unwrap();
        for (i, j, k) in [(One, Two, Three), (Two, Three, ThreeBar), (One, ThreeBar, Two)] {
            let p = s.alpha_labels(i, j, k).unwrap() * s.alpha_labels(j, i, k).unwrap();
            prop_assert!((p - 1.0).norm() < 1e-8);
        }
    }
}
