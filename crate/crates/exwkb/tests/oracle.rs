use exwkb::oracle::{self, Grid};
use exwkb::*;

fn lopsided(sign: f64) -> RationalPotential {
    // (x² + 0.6x − 1)/(x² + 1)² and its mirror image
    RationalPotential::new(Poly::from_real(&[-1.0, 0.6 * sign, 1.0]), Poly::from_real(&[1.0, 0.0, 2.0, 0.0, 1.0]), None).unwrap()
}

#[test]
fn harmonic_levels_are_odd_multiples_of_hbar() {
    let levels = oracle::numerov_bound_states(&RationalPotential::harmonic(), 1.0, (0.0, 4.0), 12001).unwrap();
    assert_eq!(levels.len(), 2);
    assert!((levels[0] - 1.0).abs() <= 1e-8, "{}", levels[0]);
    assert!((levels[1] - 3.0).abs() <= 1e-8, "{}", levels[1]);
}

#[test]
fn double_hump_reference_level_survives_grid_doubling() {
    let dh = RationalPotential::double_hump();
    let a = oracle::numerov_bound_states(&dh, 0.5, (-1.0, 0.0), oracle::DEFAULT_POINTS).unwrap();
    let b = oracle::numerov_bound_states(&dh, 0.5, (-1.0, 0.0), 2 * oracle::DEFAULT_POINTS - 1).unwrap();
    assert_eq!(a.len(), 1);
    assert!((a[0] - b[0]).abs() <= 1e-8);
    assert!((a[0] + 0.395757590168771).abs() <= 1e-6);
}

#[test]
fn empty_window_above_the_continuum_edge() {
    let dh = RationalPotential::double_hump();
    assert!(oracle::numerov_bound_states(&dh, 0.5, (0.2, 0.3), 4001).unwrap().is_empty());
}

#[test]
fn free_particle_is_fully_transmitted() {
    let free = RationalPotential::new(Poly::zero(), Poly::from_real(&[1.0]), None).unwrap();
    let t = oracle::transmission(&free, 0.1, 0.5).unwrap();
    assert!(t.r.norm() < 1e-8, "{}", t.r);
    assert!((t.t2() - 1.0).abs() < 1e-8);
}

#[test]
fn far_above_the_barrier_almost_everything_passes() {
    let t = oracle::transmission(&RationalPotential::double_hump(), 0.1, 1.0).unwrap();
    assert!(t.t2() >= 0.99, "{}", t.t2());
    assert!(t.unitarity_defect <= oracle::UNITARITY_TOL);
}

#[test]
fn transmission_is_the_same_from_both_sides() {
    for e in [0.05, 0.3] {
        let a = oracle::transmission(&lopsided(1.0), 0.1, e).unwrap();
        let b = oracle::transmission(&lopsided(-1.0), 0.1, e).unwrap();
        assert!((a.t.norm() - b.t.norm()).abs() <= 1e-8, "E = {e}: {} vs {}", a.t.norm(), b.t.norm());
        // reflection differs in phase only
        assert!((a.r.norm() - b.r.norm()).abs() <= 1e-8);
    }
}

#[test]
fn energies_below_the_asymptote_are_refused() {
    let dh = RationalPotential::double_hump();
    assert!(matches!(oracle::transmission(&dh, 0.1, -0.1), Err(Error::Unsupported(_))));
    let slow = RationalPotential::new(Poly::from_real(&[0.0, 1.0]), Poly::from_real(&[1.0, 0.0, 1.0]), None).unwrap();
    assert!(matches!(oracle::transmission(&slow, 0.1, 0.5), Err(Error::NonDecayingPotential)));
}

#[test]
fn symmetric_double_barrier_peaks_at_unit_transmission() {
    let dh = RationalPotential::double_hump();
    let e0 = 0.041170490142;
    let fit = oracle::resonance_fit(&dh, 0.1, (e0 - 3e-6, e0 + 3e-6)).unwrap();
    assert!((fit.peak - 1.0).abs() <= 0.05, "{}", fit.peak);
    assert!((fit.e0 - e0).abs() < 1e-9);
    assert!(fit.gamma > 0.0 && fit.gamma < 1e-7);
}

#[test]
fn window_without_a_peak() {
    let dh = RationalPotential::double_hump();
    assert!(matches!(oracle::resonance_fit(&dh, 0.1, (0.2, 0.3)), Err(Error::NoPeakFound { .. })));
}

#[test]
fn coulomb_levels_in_closed_form() {
    let l0 = oracle::coulomb_exact_levels(2.0, 0, 1.0, 3);
    assert_eq!(l0, vec![-1.0, -0.25, -1.0 / 9.0]);
    assert_eq!(oracle::coulomb_exact_levels(2.0, 1, 1.0, 2), vec![-0.25]);
    let (a, b) = (oracle::coulomb_exact_levels(2.0, 0, 1.0, 4), oracle::coulomb_exact_levels(4.0, 0, 1.0, 4));
    for (x, y) in a.iter().zip(&b) {
        assert!((y / x - 4.0).abs() < 1e-14);
    }
}

#[test]
fn meshes_must_be_usable() {
    assert!(matches!(Grid::new(-1.0, 1.0, 3), Err(Error::GridTooCoarse(_))));
    assert!(matches!(Grid::new(1.0, 1.0, 1001), Err(Error::GridTooCoarse(_))));
}
