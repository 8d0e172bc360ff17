use exwkb::connection::{barrier_amplitudes_with, bound_states_with, coulomb_chi_cancellation};
use exwkb::SectorLabel::*;
use exwkb::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn solver(e: f64, hbar: f64) -> Solver {
    let q = build_effective_q(&RationalPotential::double_hump(), c(e, 0.0), hbar).unwrap();
    Solver::new(&q).unwrap()
}

#[test]
fn coefficient_of_a_solution_with_itself_is_one() {
    let s = solver(0.05, 0.1);
    for k in 0..s.graph().sectors.len() {
        let a = s.alpha(0, 0, k).unwrap();
        assert_eq!(a.value, c(1.0, 0.0));
        assert_eq!(a.provenance.log_ratio, c(0.0, 0.0));
    }
}

#[test]
fn reciprocal_coefficients_multiply_to_one() {
    let s = solver(-0.5, 0.5);
    let labels = [One, Two, Three, ThreeBar];
    for i in labels {
        for j in labels {
            for k in labels {
                if i != j && k != i && k != j {
                    let p = s.alpha_labels(i, j, k).unwrap() * s.alpha_labels(j, i, k).unwrap();
                    assert!((p - 1.0).norm() < 1e-8, "{i}/{j}->{k}: {p}");
                }
            }
        }
    }
}

#[test]
fn no_levels_above_the_binding_range() {
    let dh = RationalPotential::double_hump();
    assert!(bound_states(&dh, 0.5, (0.2, 0.3), Mode::Exact).unwrap().is_empty());
    assert!(bound_states(&dh, 0.5, (0.2, 0.3), Mode::Jwkb).unwrap().is_empty());
}

#[test]
fn double_hump_ground_level() {
    let dh = RationalPotential::double_hump();
    let levels = bound_states(&dh, 0.5, (-1.0, 0.0), Mode::Exact).unwrap();
    assert_eq!(levels.len(), 1);
    let l = &levels[0];
    assert!((l.energy.re + 0.395757590168771).abs() < 1e-9, "{}", l.energy);
    assert!(l.energy.im.abs() <= 1e-10);
    assert!(l.residual <= 1e-10);
    assert_eq!(l.method, SpectralMethod::ExactCondition);
}

#[test]
fn levels_do_not_depend_on_the_route() {
    let dh = RationalPotential::double_hump();
    let mut found = Vec::new();
    for route in [RoutePreference::SkeletonFirst, RoutePreference::FanFirst, RoutePreference::SkeletonOnly, RoutePreference::FanOnly] {
        let opts = SolverOptions { route, ..SolverOptions::default() };
        if let Ok(v) = bound_states_with(&dh, 0.3, (-1.0, 0.0), Mode::Exact, opts) {
            found.push((route, v.iter().map(|r| r.energy.re).collect::<Vec<_>>()));
        }
    }
    assert!(found.len() >= 2, "fewer than two routes available: {found:?}");
    let (_, base) = &found[0];
    assert!(!base.is_empty());
    for (route, v) in &found[1..] {
        assert_eq!(v.len(), base.len(), "{route:?}");
        for (a, b) in v.iter().zip(base) {
            assert!((a - b).abs() <= 1e-9, "{route:?}: {a} vs {b}");
        }
    }
}

#[test]
fn semiclassical_reflection_under_the_barrier_is_i() {
    let dh = RationalPotential::double_hump();
    for e in [0.01, 0.03, 0.05, 0.06] {
        let s = barrier_amplitudes(&dh, 0.1, e, Mode::Jwkb).unwrap();
        assert_eq!(s.regime, Regime::Tunneling);
        assert!((s.r - c(0.0, 1.0)).norm() < 1e-12, "E = {e}: {}", s.r);
    }
}

#[test]
fn flux_is_conserved_in_both_regimes() {
    let dh = RationalPotential::double_hump();
    for e in [0.02, 0.05, 0.3, 1.0] {
        let s = barrier_amplitudes(&dh, 0.1, e, Mode::Exact).unwrap();
        let defect = (s.r.norm_sqr() + s.t.norm_sqr() - 1.0).abs();
        assert!(defect <= 1e-6, "E = {e}: {defect}");
        assert!((defect - s.unitarity_defect).abs() < 1e-12);
    }
    assert_eq!(barrier_amplitudes(&dh, 0.1, 0.3, Mode::Exact).unwrap().regime, Regime::OverBarrier);
}

#[test]
fn scattering_below_the_asymptote_is_refused() {
    let dh = RationalPotential::double_hump();
    assert!(matches!(barrier_amplitudes(&dh, 0.1, -0.2, Mode::Exact), Err(Error::Unsupported(_))));
    let top = (1.0 + 0.01 / 2.0) / 8.0;
    assert!(barrier_amplitudes_with(&dh, 0.1, top, Mode::Exact, SolverOptions::default()).is_err());
}

#[test]
fn coulomb_spectrum_is_hydrogen_like() {
    let s0 = coulomb_levels(2.0, 0, 1.0, 2).unwrap();
    for (k, r) in s0.iter().enumerate() {
        let n = (k + 1) as f64;
        assert!((r.energy.re + 1.0 / (n * n)).abs() <= 1e-10, "k = {k}: {}", r.energy);
    }
    let s1 = coulomb_levels(2.0, 1, 1.0, 0).unwrap();
    assert!((s1[0].energy.re + 0.25).abs() <= 1e-10);
}

#[test]
fn coulomb_chi_factors_cancel_at_a_level() {
    let d = coulomb_chi_cancellation(2.0, 0, 1.0, -0.25).unwrap();
    assert!(d <= 1e-7, "{d}");
}

#[test]
fn coulomb_partial_waves() {
    let p0 = coulomb_phase(2.0, 0, 1.0, 0.5).unwrap();
    let p1 = coulomb_phase(2.0, 1, 1.0, 0.5).unwrap();
    assert!(p0.unitarity_defect <= 1e-7 && p1.unitarity_defect <= 1e-7);
    assert!((p0.s.norm() - 1.0).abs() <= 1e-7);
    assert!((p0.phase - p1.phase).abs() > 1e-3);
    assert!(matches!(coulomb_phase(2.0, 0, 1.0, -0.5), Err(Error::Unsupported(_))));
}

#[test]
fn resonance_methods_agree_at_small_hbar() {
    let dh = RationalPotential::double_hump();
    let exact = resonances(&dh, 0.1, (0.0, 0.125), ResonanceMethod::ComplexRoot).unwrap();
    let pert = resonances(&dh, 0.1, (0.0, 0.125), ResonanceMethod::Perturbative).unwrap();
    let (a, b) = (exact[0], pert[0]);
    assert!(a.gamma > 0.0 && b.gamma > 0.0);
    assert!((a.e0 - b.e0).abs() < 1e-8);
    assert!((a.gamma / b.gamma - 1.0).abs() <= 0.05, "{} vs {}", a.gamma, b.gamma);
    assert!(a.width_ratio < 1e-5);
}

#[test]
fn semiclassical_coulomb_phase_misses_only_second_order() {
    let gap = |hbar: f64| {
        let p = coulomb_phase(2.0, 0, hbar, 0.5).unwrap();
        (p.phase - p.jwkb_phase).abs()
    };
    let ratio = gap(1.0) / gap(0.5);
    assert!((ratio / 4.0 - 1.0).abs() <= 0.25, "ratio {ratio}");
}

#[test]
fn over_barrier_reflection_has_the_anti_stokes_exponent() {
    let dh = RationalPotential::double_hump();
    let hbar = 0.1;
    for e in [0.3, 0.5, 0.8] {
        let ex = barrier_amplitudes(&dh, hbar, e, Mode::Exact).unwrap();
        let jw = barrier_amplitudes(&dh, hbar, e, Mode::Jwkb).unwrap();
        let j = jw.anti_stokes_integral.unwrap();
        assert!(j.re < 0.0 && j.im.abs() <= 1e-8 * j.norm());
        assert!((jw.r.norm() - (j.re / hbar).exp()).abs() <= 1e-12 * jw.r.norm());
        assert!(jw.t.norm() <= 1.0);
        // the two humps reflect coherently, so |R|² ≤ (2 e^{J/ħ})²
        let ratio = ex.r.norm_sqr() / (2.0 * j.re / hbar).exp();
        assert!(ratio <= 4.0, "E = {e}: |R|² is {ratio} times e^(2J/ħ)");
        assert!(ratio > 1e-3, "E = {e}: |R|² far below the semiclassical scale ({ratio})");
    }
}
