//! Reflection and transmission across a double barrier.
//!
//! The incoming wave is `Ψ_2` (from the left), the reflected one `Ψ_2̄` and the
//! transmitted one `Ψ_1`: `Ψ_2 = R Ψ_2̄ + T Ψ_1`. Continuing `Ψ_1` through the
//! pole sectors `3`, `3̄` gives `Ψ_1 = a Ψ_2 + b Ψ_2̄` with
//! `a = α_{1/3→3̄} α_{3/2→2̄} + α_{1/3̄→3} α_{3̄/2→2̄}` and
//! `b = α_{1/3→3̄} α_{3/2̄→2} + α_{1/3̄→3} α_{3̄/2̄→2}`, so `R = −b/a`, `T = 1/a`.
//!
//! Phases follow the convention in which the semiclassical limits read
//! `R = i` under the barrier and `R = i e^{J/ħ}` above it: relative to the
//! normalisation of the fundamental solutions used internally this is
//! `R → iR`, `T → −T`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bound::{asymptotic_value, well_action};
use super::{pair_loop, real_turning_points, Mode, Solver, SolverOptions};
use crate::contour::{action_integral, track_branch};
use crate::error::{Error, Result};
use crate::potential::{build_effective_q, EffectiveQ, RationalPotential};
use crate::stokes::SectorLabel;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Tunneling,
    OverBarrier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringAmplitudes {
    pub r: Complex64,
    pub t: Complex64,
    pub energy: f64,
    pub regime: Regime,
    pub mode: Mode,
    /// `| |R|² + |T|² − 1 |`.
    pub unitarity_defect: f64,
    /// Above the barrier: `∫_{x̄₁}^{x₁} √q` along the anti-Stokes segment
    /// (expected real and negative). Absent below the barrier.
    pub anti_stokes_integral: Option<Complex64>,
}

/// Highest point of `V` on the real axis: `(x, V, V'')`.
pub(crate) fn barrier_top(pot: &RationalPotential) -> Option<(f64, f64, f64)> {
    let v = |x: f64| pot.eval(Complex64::new(x, 0.0)).re;
    let (lo, hi, n) = (-60.0, 60.0, 24001);
    let h = (hi - lo) / (n - 1) as f64;
    let mut best: Option<(f64, f64)> = None;
    for j in 1..n - 1 {
        let x = lo + h * j as f64;
        let (a, b, c) = (v(x - h), v(x), v(x + h));
        if b.is_finite() && b >= a && b >= c && (best.is_none() || b > best.unwrap().1) {
            best = Some((x, b));
        }
    }
    let (x0, _) = best?;
    // golden-section refinement
    let (mut a, mut b) = (x0 - h, x0 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if v(c) > v(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let x = 0.5 * (a + b);
    let e = 1e-4;
    let d2 = (v(x + e) - 2.0 * v(x) + v(x - e)) / (e * e);
    Some((x, v(x), d2))
}

/// Near the barrier top the turning points collide and the connection
/// formulas of both regimes fail. The refused band is two parabolic-cylinder
/// energy units `ħ √(|V''|/2)` wide on either side.
pub(crate) fn degenerate_band(pot: &RationalPotential, hbar: f64) -> Option<(f64, f64)> {
    barrier_top(pot).map(|(_, v, d2)| (v, 2.0 * hbar * (0.5 * d2.abs()).sqrt()))
}

pub fn barrier_amplitudes(pot: &RationalPotential, hbar: f64, energy: f64, mode: Mode) -> Result<ScatteringAmplitudes> {
    barrier_amplitudes_with(pot, hbar, energy, mode, SolverOptions::default())
}

pub fn barrier_amplitudes_with(
    pot: &RationalPotential,
    hbar: f64,
    energy: f64,
    mode: Mode,
    options: SolverOptions,
) -> Result<ScatteringAmplitudes> {
    let v_inf = asymptotic_value(pot);
    if !(energy > v_inf) {
        return Err(Error::Unsupported(format!("scattering needs E > V(±∞) = {v_inf:.6e}")));
    }
    let (v_top, band) = degenerate_band(pot, hbar).ok_or(Error::GraphDegenerate("no barrier on the real axis".into()))?;
    if (energy - v_top).abs() < band {
        return Err(Error::GraphDegenerate(format!(
            "E = {energy} lies within {band:.3e} of the barrier top {v_top}; turning points nearly collide"
        )));
    }
    let regime = if energy < v_top { Regime::Tunneling } else { Regime::OverBarrier };
    let (r, t, anti) = match mode {
        Mode::Exact => {
            let q = build_effective_q(pot, Complex64::new(energy, 0.0), hbar)?;
            let solver = Solver::with_options(&q, options)?;
            if regime == Regime::Tunneling {
                let d = resonant_denominator(&solver)?;
                if d.norm() < 1e-6 {
                    return Err(Error::ResonantDenominator { magnitude: d.norm() });
                }
            }
            let (r, t) = exact_amplitudes(&solver)?;
            (r, t, None)
        }
        Mode::Jwkb => {
            let q = EffectiveQ::without_langer(pot, Complex64::new(energy, 0.0), hbar)?;
            match regime {
                Regime::Tunneling => {
                    let (r, t) = jwkb_tunneling(&q)?;
                    (r, t, None)
                }
                Regime::OverBarrier => {
                    let (r, t, j) = jwkb_over_barrier(&q)?;
                    (r, t, Some(j))
                }
            }
        }
    };
    Ok(ScatteringAmplitudes {
        r,
        t,
        energy,
        regime,
        mode,
        unitarity_defect: (r.norm_sqr() + t.norm_sqr() - 1.0).abs(),
        anti_stokes_integral: anti,
    })
}

/// `R`, `T` from the α-coefficients (both regimes).
pub(crate) fn exact_amplitudes(solver: &Solver) -> Result<(Complex64, Complex64)> {
    use SectorLabel::*;
    let al = |i, j, k| solver.alpha_labels(i, j, k);
    let a = al(One, Three, ThreeBar)? * al(Three, Two, TwoBar)? + al(One, ThreeBar, Three)? * al(ThreeBar, Two, TwoBar)?;
    let b = al(One, Three, ThreeBar)? * al(Three, TwoBar, Two)? + al(One, ThreeBar, Three)? * al(ThreeBar, TwoBar, Two)?;
    Ok((-I * b / a, -1.0 / a))
}

/// `χ_{1→3} χ_{2̄→3̄} e^{−A/2ħ} + χ_{1→3̄} χ_{2̄→3} e^{A/2ħ}`; vanishes at a resonance.
pub(crate) fn resonant_denominator(solver: &Solver) -> Result<Complex64> {
    use SectorLabel::*;
    let hb = solver.q().hbar;
    let a = well_action(solver.q(), Some(solver))?;
    let c = |x, y| solver.chi_between(x, y);
    Ok(c(One, Three)? * c(TwoBar, ThreeBar)? * (-a / (2.0 * hb)).exp() + c(One, ThreeBar)? * c(TwoBar, Three)? * (a / (2.0 * hb)).exp())
}

/// Loop action around the barrier pair right of the well, on the branch where
/// it is negative (`e^{∮/ħ}` is the small barrier-penetration factor).
pub(crate) fn right_barrier_action(q: &EffectiveQ) -> Result<Complex64> {
    let tps = real_turning_points(q)?;
    let (_, k) = super::bound::inner_pair(q, &tps)?;
    let c = *tps.get(k + 1).ok_or_else(|| Error::GraphDegenerate("no outer turning point right of the well".into()))?;
    let v = pair_loop(q, tps[k], c)?;
    Ok(if v.re > 0.0 { -v } else { v })
}

/// Loop action around the barrier pair left of the well, on the branch where
/// it is positive (so that `e^{−∮/ħ}` is small).
pub(crate) fn left_barrier_action(q: &EffectiveQ) -> Result<Complex64> {
    let tps = real_turning_points(q)?;
    let (k, _) = super::bound::inner_pair(q, &tps)?;
    if k == 0 {
        return Err(Error::GraphDegenerate("no outer turning point left of the well".into()));
    }
    let v = pair_loop(q, tps[k - 1], tps[k])?;
    Ok(if v.re < 0.0 { -v } else { v })
}

/// `R = i`, `T = −e^{∮_{K₂}√q/ħ} / (2 cos(S/ħ))` with `S = ∫ √(E − V)` across the well.
fn jwkb_tunneling(q: &EffectiveQ) -> Result<(Complex64, Complex64)> {
    let hb = q.hbar;
    let a = well_action(q, None)?;
    // A = −2iS on this branch
    let s = (I * a / 2.0).re;
    let k2 = right_barrier_action(q)?;
    let t = -(k2 / hb).exp() / (2.0 * (s / hb).cos());
    Ok((I, Complex64::new(t.re, t.im)))
}

/// `R = i e^{J/ħ}`, `T = e^{−(1/ħ)∫_{x₁}^{−x̄₁}√q}` with `J = ∫_{x̄₁}^{x₁} √q`.
///
/// On the real axis the branch is that of the incoming wave, `√q = +i√(E−V)`.
/// `J` is taken along the vertical segment through `Re x₁`; its imaginary part
/// measures how far that segment is from an anti-Stokes line.
fn jwkb_over_barrier(q: &EffectiveQ) -> Result<(Complex64, Complex64, Complex64)> {
    let hb = q.hbar;
    let x1 = q
        .find_turning_points()?
        .iter()
        .map(|t| t.location)
        .filter(|z| z.re > 0.0 && z.im > 0.0)
        .min_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .ok_or_else(|| Error::GraphDegenerate("no complex turning point in the first quadrant".into()))?;
    let c = Complex64::new(x1.re, 0.0);
    let seed = |x: Complex64| I * (-q.q(x)).sqrt();
    let leg = |from: Complex64, to: Complex64| -> Result<Complex64> {
        let path = track_branch(q, &[from, to], seed(from))?;
        Ok(action_integral(q, &path)?.0)
    };
    let up = leg(c, x1)?;
    let down = leg(c, x1.conj())?;
    let j = up - down;
    let across = leg(c, -c)?;
    let left_up = leg(-c, -x1.conj())?;
    let w = -up + across + left_up;
    Ok((I * (j / hb).exp(), (-w / hb).exp(), j))
}

/// `(∮_{K₁} √q̃, ∮_{K₂} √q̃)` at a real energy inside the well: the loop actions
/// around the barrier pairs left and right of the classically allowed interval,
/// on the branches where both penetration factors `e^{−K₁/ħ}`, `e^{K₂/ħ}` are small.
pub fn barrier_actions(pot: &RationalPotential, hbar: f64, e: f64) -> Result<(Complex64, Complex64)> {
    let q = build_effective_q(pot, Complex64::new(e, 0.0), hbar)?;
    Ok((left_barrier_action(&q)?, right_barrier_action(&q)?))
}
