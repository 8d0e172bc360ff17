//! Bound states of a well between two barriers.
//!
//! `Ψ_1` (recessive at +∞) and `Ψ_2` (recessive at −∞) must coincide. Matching
//! them at the two double poles `3`, `3̄` gives
//! `F(E) = e^{−A/ħ} + χ_{1→3̄} χ_{2→3} / (χ_{1→3} χ_{2→3̄}) = 0`, where `A` is
//! the loop action around the two real turning points of the well. For real
//! `E` both terms are unimodular, so roots are located on the phase of
//! `−χ_{1→3̄} χ_{2→3} e^{A/ħ} / (χ_{1→3} χ_{2→3̄})`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::roots::brent;
use super::{real_turning_points, Mode, Solver, SolverOptions, SpectralMethod, SpectralResult};
use crate::error::{Error, Result};
use crate::potential::{build_effective_q, EffectiveQ, RationalPotential};
use crate::stokes::SectorLabel;

const SCAN_POINTS: usize = 64;
const MAX_REFINE: u32 = 6;

/// Loop action around the two real turning points of the well, on the branch
/// where `e^{−A/ħ}` turns counter-clockwise as `E` grows (`Im A ≤ 0`).
pub(crate) fn well_action(q: &EffectiveQ, solver: Option<&Solver>) -> Result<Complex64> {
    let tps = real_turning_points(q)?;
    let (a, b) = inner_pair(q, &tps)?;
    let (a, b) = (tps[a], tps[b]);
    let v = match solver {
        Some(s) => s.pair_action(a, b)?,
        None => super::pair_loop(q, a, b)?,
    };
    Ok(if v.im > 0.0 { -v } else { v })
}

/// Indices of the first adjacent pair of real turning points with a
/// classically allowed interval between them.
pub(crate) fn inner_pair(q: &EffectiveQ, tps: &[Complex64]) -> Result<(usize, usize)> {
    let e = q.energy.re;
    let pot = &q.base;
    (1..tps.len())
        .map(|k| (k - 1, k))
        .find(|&(a, b)| pot.eval(Complex64::new(0.5 * (tps[a].re + tps[b].re), 0.0)).re < e)
        .ok_or_else(|| Error::GraphDegenerate(format!("no classically allowed well at E = {e}")))
}

/// `F(E)` of the exact condition and the χ-ratio entering it.
pub fn quantization_function(solver: &Solver) -> Result<Complex64> {
    let (f, _) = condition(solver)?;
    Ok(f)
}

/// Returns `F` and `−ρ e^{A/ħ}` (which equals 1 at a level).
fn condition(solver: &Solver) -> Result<(Complex64, Complex64)> {
    use SectorLabel::*;
    let hb = solver.q().hbar;
    let c13 = solver.chi_between(One, Three)?;
    let c13b = solver.chi_between(One, ThreeBar)?;
    let c23 = solver.chi_between(Two, Three)?;
    let c23b = solver.chi_between(Two, ThreeBar)?;
    let rho = c13b * c23 / (c13 * c23b);
    let a = well_action(solver.q(), Some(solver))?;
    Ok(((-a / hb).exp() + rho, -rho * (a / hb).exp()))
}

fn jwkb_condition(pot: &RationalPotential, e: f64, hbar: f64) -> Result<(Complex64, Complex64)> {
    let q = EffectiveQ::without_langer(pot, Complex64::new(e, 0.0), hbar)?;
    let a = well_action(&q, None)?;
    Ok(((-a / hbar).exp() + 1.0, -(a / hbar).exp()))
}

/// Levels in `window` of the exact condition or of its semiclassical limit
/// (Langer term dropped, all χ-factors set to one).
pub fn bound_states(pot: &RationalPotential, hbar: f64, window: (f64, f64), mode: Mode) -> Result<Vec<SpectralResult>> {
    bound_states_with(pot, hbar, window, mode, SolverOptions::default())
}

pub fn bound_states_with(
    pot: &RationalPotential,
    hbar: f64,
    window: (f64, f64),
    mode: Mode,
    options: SolverOptions,
) -> Result<Vec<SpectralResult>> {
    let v_inf = asymptotic_value(pot);
    let lo = window.0;
    let hi = window.1.min(v_inf);
    if !(hi > lo) {
        return Ok(Vec::new());
    }
    let eval = |e: f64| -> Result<(Complex64, Complex64)> {
        match mode {
            Mode::Exact => {
                let q = build_effective_q(pot, Complex64::new(e, 0.0), hbar)?;
                condition(&Solver::with_options(&q, options)?)
            }
            Mode::Jwkb => jwkb_condition(pot, e, hbar),
        }
    };
    let phase = |e: f64| -> Result<f64> { Ok(eval(e)?.1.arg()) };
    let method = match mode {
        Mode::Exact => SpectralMethod::ExactCondition,
        Mode::Jwkb => SpectralMethod::Jwkb,
    };

    let brackets = phase_brackets(&phase, lo, hi);
    let mut out = Vec::new();
    for (a, b) in brackets {
        let (e, iters) = brent(&phase, a, b, 1e-14)?;
        let (f, _) = eval(e)?;
        out.push(SpectralResult { energy: Complex64::new(e, 0.0), residual: f.norm(), method, iterations: iters });
    }
    Ok(out)
}

/// Brackets of zero crossings of a wrapped phase on an adaptive scan of `[lo, hi]`.
/// Points where the phase cannot be evaluated are skipped.
pub(crate) fn phase_brackets<P: Fn(f64) -> Result<f64>>(phase: &P, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let h = (hi - lo) / SCAN_POINTS as f64;
    let grid: Vec<(f64, Option<f64>)> = (0..SCAN_POINTS)
        .map(|j| {
            let e = lo + h * (j as f64 + 0.5);
            (e, phase(e).ok())
        })
        .collect();
    let mut brackets = Vec::new();
    for w in grid.windows(2) {
        if let ((a, Some(ga)), (b, Some(gb))) = (w[0], w[1]) {
            collect_brackets(phase, a, ga, b, gb, 0, &mut brackets);
        }
    }
    brackets
}

/// Splits `[a, b]` until the phase moves by less than π/2 per piece and keeps
/// pieces where it crosses zero (not the ±π seam).
fn collect_brackets<P: Fn(f64) -> Result<f64>>(
    phase: &P,
    a: f64,
    ga: f64,
    b: f64,
    gb: f64,
    depth: u32,
    out: &mut Vec<(f64, f64)>,
) {
    let delta = (gb - ga + PI).rem_euclid(2.0 * PI) - PI;
    if delta.abs() > PI / 2.0 && depth < MAX_REFINE {
        let m = 0.5 * (a + b);
        if let Ok(gm) = phase(m) {
            collect_brackets(phase, a, ga, m, gm, depth + 1, out);
            collect_brackets(phase, m, gm, b, gb, depth + 1, out);
        }
        return;
    }
    if ga == 0.0 || (ga.signum() != gb.signum() && (ga - gb).abs() < PI) {
        out.push((a, b));
    }
}

/// `V(±∞)` on the real axis (the lower of the two).
pub(crate) fn asymptotic_value(pot: &RationalPotential) -> f64 {
    let big = 1e8;
    pot.eval(Complex64::new(big, 0.0)).re.min(pot.eval(Complex64::new(-big, 0.0)).re)
}
