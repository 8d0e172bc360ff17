//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use exwkb::chi::{chi_factor_on, chi_series_eval, series_coefficients, series_coefficients_between, SeriesEnd};
use exwkb::connection::{barrier_actions, coulomb_levels_with, coulomb_omega_near_origin};
use exwkb::oracle;
use exwkb::stokes::Endpoint;
use exwkb::*;
use SectorLabel::*;

type Check = std::result::Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_coulomb_exactness() -> Check {
    let mut worst: f64 = 0.0;
    for hbar in [0.5, 1.0] {
        for l in 0..=2u32 {
            let got = coulomb_levels(2.0, l, hbar, 4).map_err(err)?;
            let want = oracle::coulomb_exact_levels(2.0, l, hbar, l + 5);
            for (g, w) in got.iter().zip(&want) {
                worst = worst.max(rel(g.energy.re, *w));
            }
        }
    }
    Ok((worst <= 1e-9, format!("max |dE|/|E| = {worst:.2e} (tol 1e-9)")))
}

fn c2_bound_states() -> Check {
    let dh = RationalPotential::double_hump();
    let mut worst: f64 = 0.0;
    let mut counts = Vec::new();
    for hbar in [0.3, 0.5] {
        let got = bound_states(&dh, hbar, (-1.0, 0.0), Mode::Exact).map_err(err)?;
        let want = oracle::numerov_bound_states(&dh, hbar, (-1.0, 0.0), oracle::DEFAULT_POINTS).map_err(err)?;
        if got.len() != want.len() {
            return Ok((false, format!("hbar {hbar}: {} levels vs {} from Numerov", got.len(), want.len())));
        }
        counts.push(got.len());
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g.energy.re - w).abs());
        }
    }
    Ok((worst <= 1e-6, format!("levels {counts:?}, max |dE| = {worst:.2e} (tol 1e-6)")))
}

fn c3_jwkb_scaling() -> Check {
    let dh = RationalPotential::double_hump();
    let defect = |hbar: f64| -> std::result::Result<f64, String> {
        let ex = bound_states(&dh, hbar, (-1.0, 0.0), Mode::Exact).map_err(err)?;
        let jw = bound_states(&dh, hbar, (-1.0, 0.0), Mode::Jwkb).map_err(err)?;
        match (ex.first(), jw.first()) {
            (Some(a), Some(b)) => Ok((a.energy.re - b.energy.re).abs()),
            _ => Err(format!("no ground level at hbar {hbar}")),
        }
    };
    let (d1, d2) = (defect(0.1)?, defect(0.05)?);
    let ratio = d1 / d2;
    Ok(((ratio - 4.0).abs() <= 1.0, format!("ground-level defect {d1:.3e} -> {d2:.3e}, ratio {ratio:.3} (4 +/- 25%)")))
}

fn c4_unitarity() -> Check {
    let dh = RationalPotential::double_hump();
    let energies = [0.01, 0.02, 0.03, 0.05, 0.06, 0.2, 0.3, 0.5, 0.8, 1.2];
    let (mut defect, mut dev): (f64, f64) = (0.0, 0.0);
    for e in energies {
        let s = barrier_amplitudes(&dh, 0.1, e, Mode::Exact).map_err(|x| format!("E = {e}: {x}"))?;
        let o = oracle::transmission(&dh, 0.1, e).map_err(|x| format!("oracle at E = {e}: {x}"))?;
        defect = defect.max(s.unitarity_defect);
        dev = dev.max(rel(s.t.norm_sqr(), o.t2()));
    }
    Ok((defect <= 1e-6 && dev <= 1e-4, format!("max unitarity defect {defect:.2e} (tol 1e-6), max |T|^2 deviation {dev:.2e} (tol 1e-4)")))
}

fn c5_over_barrier_jwkb() -> Check {
    let dh = RationalPotential::double_hump();
    let (mut worst, mut max_t, mut max_im): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut all_negative = true;
    for e in [0.2, 0.3, 0.5, 0.8, 1.2] {
        let s = barrier_amplitudes(&dh, 0.1, e, Mode::Jwkb).map_err(err)?;
        let j = s.anti_stokes_integral.ok_or("no anti-Stokes integral above the barrier")?;
        all_negative &= j.re < 0.0;
        max_im = max_im.max(j.im.abs() / j.norm());
        worst = worst.max(rel(s.r.norm(), (j.re / 0.1).exp()));
        max_t = max_t.max(s.t.norm());
    }
    let pass = all_negative && max_im <= 1e-8 && worst <= 1e-12 && max_t <= 1.0;
    Ok((
        pass,
        format!("J real negative: {all_negative} (max |Im J|/|J| {max_im:.1e}), max | |R| - e^(J/h) | rel {worst:.1e}, max |T| {max_t:.6}"),
    ))
}

fn c6_resonance_width() -> Check {
    let dh = RationalPotential::double_hump();
    let window = (0.0, 0.125);
    let lowest = |hbar: f64, m: ResonanceMethod| -> std::result::Result<Option<ResonanceResult>, String> {
        match resonances(&dh, hbar, window, m) {
            Ok(v) => Ok(v.into_iter().next()),
            Err(Error::NoResonanceInWindow { .. }) => Ok(None),
            Err(e) => Err(e.to_string()),
        }
    };
    let cr = lowest(0.1, ResonanceMethod::ComplexRoot)?.ok_or("no resonance at hbar 0.1")?;
    let pt = lowest(0.1, ResonanceMethod::Perturbative)?.ok_or("no perturbative resonance at hbar 0.1")?;
    let fit = oracle::resonance_fit(&dh, 0.1, (cr.e0 - 0.004, cr.e0 + 0.004)).map_err(err)?;
    let d_pt = rel(pt.gamma, cr.gamma);
    let d_fit = rel(fit.gamma, cr.gamma);
    let mut msg = format!(
        "hbar 0.1: E0 {:.9}, Gamma {:.6e}; perturbative dev {d_pt:.2e} (tol 5e-2); oracle fit dev {d_fit:.2e} (tol 1e-1)",
        cr.e0, cr.gamma
    );
    let mut pass = d_pt <= 0.05 && d_fit <= 0.1;

    // ln Γ against 1/ħ for the lowest resonance at each ħ
    let mut pts = Vec::new();
    let mut missing = Vec::new();
    for hbar in [0.10, 0.12, 0.15] {
        match lowest(hbar, ResonanceMethod::ComplexRoot)? {
            Some(r) => pts.push((hbar, r)),
            None => missing.push(hbar),
        }
    }
    let k2: Vec<f64> = pts.iter().map(|(h, r)| barrier_actions(&dh, *h, r.e0).map(|k| k.1.re)).collect::<Result<_>>().map_err(err)?;
    let e0s: Vec<String> = pts.iter().map(|(h, r)| format!("{h}:{:.4}", r.e0)).collect();
    if pts.len() >= 2 {
        let n = pts.len() as f64;
        let xs: Vec<f64> = pts.iter().map(|(h, _)| 1.0 / h).collect();
        let ys: Vec<f64> = pts.iter().map(|(_, r)| r.gamma.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        let k2m = k2.iter().sum::<f64>() / n;
        let d = rel(slope, k2m);
        pass &= d <= 0.1 && missing.is_empty();
        msg += &format!("; slope {slope:.4} vs mean K2 {k2m:.4} (dev {d:.2e}, tol 1e-1), E0 by hbar [{}]", e0s.join(" "));
    } else {
        pass = false;
        msg += &format!("; slope undefined, E0 by hbar [{}]", e0s.join(" "));
    }
    if !missing.is_empty() {
        msg += &format!("; no resonance below the barrier-top band at hbar {missing:?}");
    }
    Ok((pass, msg))
}

fn c7_identities() -> Check {
    let dh = RationalPotential::double_hump();
    let (mut quartet, mut chi_form, mut real_form, mut recip): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for (e, hbar) in [(0.05, 0.1), (0.05, 0.2), (0.09, 0.15)] {
        let q = build_effective_q(&dh, Complex64::new(e, 0.0), hbar).map_err(err)?;
        let s = Solver::new(&q).map_err(err)?;
        let (k1, k2) = barrier_actions(&dh, hbar, e).map_err(err)?;
        let c = |a, b| s.chi_between(a, b).map_err(err);
        let al = |i, j, k| s.alpha_labels(i, j, k).map_err(err);
        let c33 = c(Three, ThreeBar)?;
        for (a, ab, damp) in [(One, OneBar, (-k1 / hbar).exp()), (Two, TwoBar, (k2 / hbar).exp())] {
            let lhs = al(a, ab, Three)?;
            let rhs = al(a, ab, ThreeBar)? + al(a, ThreeBar, ab)? * al(ThreeBar, ab, Three)?;
            quartet = quartet.max((lhs - rhs).norm() / lhs.norm().max(1.0));
            let r33 = c(a, Three)? * c(ab, ThreeBar)? - (c(ab, Three)? * c(a, ThreeBar)? - c33 * damp);
            chi_form = chi_form.max(r33.norm());
            let r34 = c(a, Three)?.norm_sqr() - (c(ab, Three)?.norm_sqr() - c33 * damp);
            real_form = real_form.max(r34.norm());
            let group = [a, ab, Three, ThreeBar];
            for i in group {
                for j in group {
                    for k in group {
                        if i != j && k != i && k != j {
                            recip = recip.max((al(i, j, k)? * al(j, i, k)? - 1.0).norm());
                        }
                    }
                }
            }
        }
    }
    let pass = quartet <= 1e-7 && chi_form <= 1e-7 && real_form <= 1e-7 && recip <= 1e-8;
    Ok((
        pass,
        format!("quartet {quartet:.1e}, chi-form {chi_form:.1e}, real-E form {real_form:.1e} (tol 1e-7); reciprocal {recip:.1e} (tol 1e-8)"),
    ))
}

fn c8_series() -> Check {
    let dh = RationalPotential::double_hump();
    let e = Complex64::new(-0.5, 0.0);
    let defects = |hbar: f64| -> std::result::Result<Vec<f64>, String> {
        let q = build_effective_q(&dh, e, hbar).map_err(err)?;
        let g = trace_graph(&q).map_err(err)?;
        let s = Solver::from_graph(g, SolverOptions::default());
        let (i1, i3) = (s.sector(One).map_err(err)?, s.sector(Three).map_err(err)?);
        let cp = plan_canonical_path(s.graph(), i1, i3).map_err(err)?;
        let ode = chi_factor_on(s.graph(), &cp, &ChiOptions { rtol: 1e-12, atol: 1e-16, ..ChiOptions::default() }).map_err(err)?.chi.value;
        let Endpoint::Pole { z, .. } = s.graph().sectors[i3].endpoint else {
            return Err("sector 3 does not end at a pole".into());
        };
        (1..=3)
            .map(|n| {
                let sc = series_coefficients_between(&q, &cp.path, n, SeriesEnd::Infinity, SeriesEnd::Pole(z)).map_err(err)?;
                Ok((ode - chi_series_eval(&sc, 1, hbar).value).norm())
            })
            .collect()
    };
    let (a, b) = (defects(0.1)?, defects(0.05)?);
    let mut pass = true;
    let mut parts = Vec::new();
    for n in 0..3 {
        let ratio = a[n] / b[n];
        let want = 2f64.powi(n as i32 + 2);
        pass &= (ratio / want - 1.0).abs() <= 0.3;
        parts.push(format!("N={} ratio {ratio:.2} (want {want})", n + 1));
    }

    // translation: I_n over a path equals the convolution over its two halves
    let q = build_effective_q(&dh, e, 0.1).map_err(err)?;
    let g = trace_graph(&q).map_err(err)?;
    let (i1, i3) = (g.sectors.iter().position(|s| s.label == One), g.sectors.iter().position(|s| s.label == Three));
    let cp = plan_canonical_path(&g, i1.ok_or("no sector 1")?, i3.ok_or("no sector 3")?).map_err(err)?;
    let w = &cp.path.waypoints;
    let mid = 0.5 * (w[0] + w[1]);
    let mut pts = vec![w[0], mid];
    pts.extend_from_slice(&w[1..]);
    let seed = cp.path.samples[0].sqrt_q;
    let full = track_branch(&q, &pts, seed).map_err(err)?;
    let p1 = track_branch(&q, &pts[..2], seed).map_err(err)?;
    let p2 = track_branch(&q, &pts[1..], p1.end_sqrt_q()).map_err(err)?;
    let n = 4;
    let (f, x, y) = (
        series_coefficients(&q, &full, n).map_err(err)?.i,
        series_coefficients(&q, &p1, n).map_err(err)?.i,
        series_coefficients(&q, &p2, n).map_err(err)?.i,
    );
    let mut trans: f64 = 0.0;
    for k in 0..=n {
        let conv: Complex64 = (0..=k).map(|p| x[p] * y[k - p]).sum();
        trans = trans.max((f[k] - conv).norm() / f[k].norm().max(1.0));
    }
    pass &= trans <= 1e-7;
    Ok((pass, format!("{}; translation residual {trans:.1e} (tol 1e-7)", parts.join(", "))))
}

fn c9_graph_structure() -> Check {
    let dh = RationalPotential::double_hump();
    let mut notes = Vec::new();
    let mut pass = true;
    for (e, hbar, want) in [
        (-0.5, 0.5, vec![One, Two, Three, ThreeBar]),
        (0.05, 0.1, vec![One, OneBar, Two, TwoBar, Three, ThreeBar]),
        (0.5, 0.1, vec![One, OneBar, Two, TwoBar, Three, ThreeBar]),
    ] {
        let q = build_effective_q(&dh, Complex64::new(e, 0.0), hbar).map_err(err)?;
        let g = trace_graph(&q).map_err(err)?;
        let three = g.turning_points.iter().all(|t| g.lines.iter().filter(|l| (l.origin - t).norm() < 1e-12).count() == 3);
        let re_w = g.lines.iter().map(|l| l.max_re_w).fold(0.0, f64::max);
        // every line has a mirror image under complex conjugation
        let mirrored = g.lines.iter().all(|l| {
            g.lines.iter().any(|m| {
                (m.origin - l.origin.conj()).norm() < 1e-9
                    && l.points.iter().take(20).zip(&m.points).all(|(a, b)| (a.conj() - b).norm() < 1e-6 * (1.0 + a.norm()))
            })
        });
        let mut labels: Vec<SectorLabel> = g.sectors.iter().map(|s| s.label).collect();
        labels.sort();
        let mut want = want;
        want.sort();
        // 2 and 2̄ are the left-hand sectors at infinity, mirror images of each other
        let side = |l: SectorLabel| {
            g.sectors.iter().find(|s| s.label == l).map(|s| match s.endpoint {
                Endpoint::Infinity { lo, hi } => Some(0.5 * (lo + hi)),
                _ => None,
            })
        };
        let left = |a: f64| a.cos() < 0.0;
        let two_ok = match (side(Two), side(TwoBar)) {
            (Some(Some(a)), Some(Some(b))) => left(a) && left(b) && (a.sin() + b.sin()).abs() < 1e-9,
            (Some(Some(a)), None) => left(a),
            _ => false,
        };
        let ok = three && re_w <= 1e-6 && mirrored && labels == want && two_ok;
        pass &= ok;
        notes.push(format!(
            "E={e}: 3 lines/tp {three}, max Re W {re_w:.1e}, conjugate {mirrored}, sectors [{}], S2 on left {two_ok}",
            labels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ")
        ));
    }
    Ok((pass, notes.join("; ")))
}

fn c10_langer() -> Check {
    let mut pass = true;
    let mut notes = Vec::new();
    for l in 0..=2u32 {
        let e = -1.0 / ((l + 1) * (l + 1)) as f64;
        let with = coulomb_omega_near_origin(2.0, l, 1.0, e, true);
        let without = coulomb_omega_near_origin(2.0, l, 1.0, e, false);
        let detected = matches!(without, Err(Error::QuadratureNotConverged { .. }));
        let exact = oracle::coulomb_exact_levels(2.0, l, 1.0, l + 3);
        let lang = coulomb_levels_with(2.0, l, 1.0, 2, true).map_err(err)?;
        let bare = coulomb_levels_with(2.0, l, 1.0, 2, false).map_err(err)?;
        let worst = |v: &[SpectralResult]| v.iter().zip(&exact).map(|(g, w)| rel(g.energy.re, *w)).fold(0.0, f64::max);
        let (el, eb) = (worst(&lang), worst(&bare));
        pass &= with.is_ok() && detected && el <= 1e-9 && eb > 1e-2;
        notes.push(format!("l={l}: omega converges {} / diverges without {detected}, level error {el:.1e} -> {eb:.1e}", with.is_ok()));
    }
    Ok((pass, notes.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("Coulomb exactness", c1_coulomb_exactness),
        ("bound states vs Numerov", c2_bound_states),
        ("JWKB defect scaling", c3_jwkb_scaling),
        ("unitarity and transmission", c4_unitarity),
        ("JWKB over-barrier limits", c5_over_barrier_jwkb),
        ("resonance widths", c6_resonance_width),
        ("connection identities", c7_identities),
        ("semiclassical series", c8_series),
        ("Stokes graph structure", c9_graph_structure),
        ("Langer necessity", c10_langer),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, msg) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!("[{}] {:>2} {name}: {msg} ({:.1} s)", if ok { "PASS" } else { "FAIL" }, n + 1, t.elapsed().as_secs_f64());
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
