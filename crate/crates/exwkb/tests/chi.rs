use exwkb::chi::{chi_factor_on, chi_series_eval, omega_integral_to, series_coefficients, series_coefficients_between, SeriesEnd};
use exwkb::connection::coulomb_omega_near_origin;
use exwkb::stokes::Endpoint;
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
fn conjugate_sectors_give_conjugate_chi() {
    let s = solver(-0.5, 0.5);
    let a = s.chi_between(One, Three).unwrap();
    let b = s.chi_between(One, ThreeBar).unwrap();
    assert!((a - b.conj()).norm() < 1e-8, "{a} vs {b}");
}

#[test]
fn chi_approaches_one_linearly_in_hbar() {
    let dev = |hbar: f64| (solver(-0.5, hbar).chi_between(One, Three).unwrap() - 1.0).norm();
    let ratio = dev(0.3) / dev(0.15);
    assert!((ratio / 2.0 - 1.0).abs() <= 0.2, "ratio {ratio}");
}

#[test]
fn first_coefficient_is_the_omega_integral() {
    let q = build_effective_q(&RationalPotential::double_hump(), c(-0.5, 0.0), 0.5).unwrap();
    let (x0, z) = (c(1.0, 0.5), c(0.0, 1.0));
    let x1 = z + (x0 - z) * 0.3;
    let seed = q.qt(x0).sqrt();
    let path = track_branch(&q, &[x0, x1], seed).unwrap();
    let sc = series_coefficients_between(&q, &path, 1, SeriesEnd::Path, SeriesEnd::Pole(z)).unwrap();
    let direct = omega_integral_to(&q, x0, z, seed).unwrap();
    assert!((sc.i[1] - direct).norm() < 1e-9, "{} vs {direct}", sc.i[1]);
    assert_eq!(sc.i[0], c(1.0, 0.0));
}

#[test]
fn zeroth_order_series_is_one() {
    let q = build_effective_q(&RationalPotential::double_hump(), c(-0.5, 0.0), 0.5).unwrap();
    let path = track_branch(&q, &[c(1.0, 0.5), c(2.0, 0.3)], q.qt(c(1.0, 0.5)).sqrt()).unwrap();
    let sc = series_coefficients(&q, &path, 0).unwrap();
    let v = chi_series_eval(&sc, 1, 0.5);
    assert_eq!(v.value, c(1.0, 0.0));
    assert_eq!(v.error_estimate, 0.0);
}

#[test]
fn series_from_infinity_to_the_pole_tracks_the_ode() {
    let hbar = 0.05;
    let s = solver(-0.5, hbar);
    let (i1, i3) = (s.sector(One).unwrap(), s.sector(Three).unwrap());
    let cp = plan_canonical_path(s.graph(), i1, i3).unwrap();
    let opts = ChiOptions { rtol: 1e-12, atol: 1e-16, ..ChiOptions::default() };
    let ode = chi_factor_on(s.graph(), &cp, &opts).unwrap().chi.value;
    let Endpoint::Pole { z, .. } = s.graph().sectors[i3].endpoint else { panic!("sector 3 should end at a pole") };
    let mut prev = f64::INFINITY;
    for n in 1..=3 {
        let sc = series_coefficients_between(s.q(), &cp.path, n, SeriesEnd::Infinity, SeriesEnd::Pole(z)).unwrap();
        let d = (ode - chi_series_eval(&sc, 1, hbar).value).norm();
        assert!(d < prev, "order {n}: {d} after {prev}");
        prev = d;
    }
    assert!(prev < 1e-5, "{prev}");
}

#[test]
fn omega_diverges_at_the_origin_without_the_langer_term() {
    for l in 0..=2 {
        let e = -1.0 / ((l + 1) * (l + 1)) as f64;
        assert!(coulomb_omega_near_origin(2.0, l, 1.0, e, true).is_ok());
        assert!(matches!(coulomb_omega_near_origin(2.0, l, 1.0, e, false), Err(Error::QuadratureNotConverged(_))));
    }
}

#[test]
fn too_high_series_order_is_unsupported() {
    let q = build_effective_q(&RationalPotential::harmonic(), c(1.0, 0.0), 1.0).unwrap();
    let path = track_branch(&q, &[c(2.0, 0.0), c(3.0, 0.0)], q.qt(c(2.0, 0.0)).sqrt()).unwrap();
    assert!(matches!(series_coefficients(&q, &path, 40), Err(Error::Unsupported(_))));
}
