use std::collections::BTreeSet;
use std::f64::consts::PI;

use exwkb::stokes::{audit_monotonicity, Endpoint};
use exwkb::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn graph(e: f64, hbar: f64) -> StokesGraph {
    let q = build_effective_q(&RationalPotential::double_hump(), c(e, 0.0), hbar).unwrap();
    trace_graph(&q).unwrap()
}

fn labels(g: &StokesGraph) -> BTreeSet<String> {
    g.sectors.iter().map(|s| s.label.to_string()).collect()
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn bound_regime_has_four_sectors() {
    let g = graph(-0.5, 0.5);
    assert_eq!(g.turning_points.len(), 4);
    assert_eq!(g.poles.len(), 2);
    assert_eq!(labels(&g), set(&["1", "2", "3", "3b"]));
    let two = &g.sectors[g.sector_by_label(SectorLabel::Two).unwrap()];
    let one = &g.sectors[g.sector_by_label(SectorLabel::One).unwrap()];
    match (two.endpoint, one.endpoint) {
        (Endpoint::Infinity { lo: a, hi: b }, Endpoint::Infinity { lo: c, hi: d }) => {
            assert!((a - PI / 2.0).abs() < 1e-6 && (b - 1.5 * PI).abs() < 1e-6, "{a} {b}");
            assert!((c - 1.5 * PI).abs() < 1e-6 && (d - 2.5 * PI).abs() < 1e-6, "{c} {d}");
        }
        other => panic!("unexpected endpoints {other:?}"),
    }
    let three = &g.sectors[g.sector_by_label(SectorLabel::Three).unwrap()];
    assert!(matches!(three.endpoint, Endpoint::Pole { order: 2, .. }));
}

#[test]
fn scattering_regime_has_six_sectors() {
    for e in [0.05, 0.5] {
        let g = graph(e, 0.1);
        assert_eq!(labels(&g), set(&["1", "1b", "2", "2b", "3", "3b"]), "E = {e}");
        for l in &g.lines {
            assert!(l.max_re_w < 1e-8, "Re W drifts by {} on a Stokes line", l.max_re_w);
        }
    }
}

#[test]
fn real_energy_graph_is_symmetric_under_conjugation() {
    let g = graph(0.05, 0.1);
    for t in &g.turning_points {
        assert!(g.turning_points.iter().any(|u| (u - t.conj()).norm() < 1e-10));
    }
    for l in &g.lines {
        let mirror = g.lines.iter().any(|m| (m.origin - l.origin.conj()).norm() < 1e-10 && m.points.len() > 1 && {
            let d = l.points[1] - l.origin;
            let e = m.points[1] - m.origin;
            (d.conj() / d.norm() - e / e.norm()).norm() < 1e-6
        });
        assert!(mirror, "no mirror for the line leaving {}", l.origin);
    }
    let pairs = [(SectorLabel::Two, SectorLabel::TwoBar), (SectorLabel::One, SectorLabel::OneBar), (SectorLabel::Three, SectorLabel::ThreeBar)];
    for (a, b) in pairs {
        let (sa, sb) = (&g.sectors[g.sector_by_label(a).unwrap()], &g.sectors[g.sector_by_label(b).unwrap()]);
        assert_eq!(sa.sigma, sb.sigma, "{a} vs {b}");
        if let (Endpoint::Pole { z: za, .. }, Endpoint::Pole { z: zb, .. }) = (sa.endpoint, sb.endpoint) {
            assert!((za - zb.conj()).norm() < 1e-12);
        }
    }
}

#[test]
fn canonical_path_from_one_to_three() {
    let g = graph(-0.5, 0.5);
    let (s1, s3) = (g.sector_by_label(SectorLabel::One).unwrap(), g.sector_by_label(SectorLabel::Three).unwrap());
    let p = plan_canonical_path(&g, s1, s3).unwrap();
    assert!(p.violation <= 1e-9);
    assert!(p.path.samples.len() > 2);
    assert!(g.communicates(s1, s3));
    let w = &p.path.samples;
    assert!(w.last().unwrap().w.re > w[0].w.re);
}

#[test]
fn path_from_a_sector_to_itself_is_trivial() {
    let g = graph(-0.5, 0.5);
    let s = g.sector_by_label(SectorLabel::Two).unwrap();
    let p = plan_canonical_path(&g, s, s).unwrap();
    assert_eq!(p.path.length(), 0.0);
    assert_eq!(action_integral(&g.q, &p.path).unwrap().0, c(0.0, 0.0));
}

#[test]
fn sectors_split_by_a_real_turning_point_do_not_communicate() {
    let g = graph(0.05, 0.1);
    let (s1, s2) = (g.sector_by_label(SectorLabel::One).unwrap(), g.sector_by_label(SectorLabel::Two).unwrap());
    assert!(matches!(plan_canonical_path(&g, s1, s2), Err(Error::CanonicalPathNotFound { .. })));
    assert!(!g.communicates(s1, s2));
    assert!(matches!(plan_canonical_path(&g, 0, 99), Err(Error::CanonicalPathNotFound { .. })));
}

#[test]
fn colliding_turning_points_at_the_barrier_top_are_non_generic() {
    let hbar = 0.1;
    let top = (1.0 + hbar * hbar / 2.0) / 8.0;
    let q = build_effective_q(&RationalPotential::double_hump(), c(top, 0.0), hbar).unwrap();
    assert!(matches!(trace_graph(&q), Err(Error::NonGenericGraph(_))));
}

#[test]
fn monotonicity_audit_flags_the_dominant_direction() {
    let q = build_effective_q(&RationalPotential::harmonic(), c(1.0, 0.0), 1.0).unwrap();
    let (a, b) = (c(3.0, 0.0), c(5.0, 0.0));
    let outward = track_branch(&q, &[a, b], q.qt(a).sqrt()).unwrap();
    assert_eq!(audit_monotonicity(&outward), 0.0);
    let inward = track_branch(&q, &[b, a], q.qt(b).sqrt()).unwrap();
    assert!(audit_monotonicity(&inward) > 1e-3);
}

#[test]
fn sector_labels_round_trip_through_text() {
    for l in ["1", "1b", "2", "2b", "3", "3b", "x4"] {
        assert_eq!(l.parse::<SectorLabel>().unwrap().to_string(), l);
    }
    assert!("7".parse::<SectorLabel>().is_err());
}
