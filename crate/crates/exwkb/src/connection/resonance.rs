//! Resonances of the double barrier: complex energies at which only outgoing
//! waves survive, `W[Ψ_1, Ψ_2̄] = 0`. In χ-factors,
//! `G(E) = e^{−A/ħ} + χ_{1→3̄} χ_{2̄→3} / (χ_{1→3} χ_{2̄→3̄}) = 0`.
//!
//! The real part is seeded by the phase of `G` on the real axis; the complex
//! root follows by secant iteration on the analytically continued graph.
//! The first-order expansion in `Γ` gives the perturbative width
//! `Γ = (ħ/τ) χ_{3→3̄} (e^{−∮_{K₁}/ħ}/|χ_{1→3}|² + e^{∮_{K₂}/ħ}/|χ_{2→3}|²)` with
//! `τ = ∫ dx/√|q̃|` across the well, which is also the classical period of the
//! motion `H = p² + V`.

use num_complex::Complex64;

use super::bound::{asymptotic_value, phase_brackets, well_action};
use super::roots::{brent, complex_secant};
use super::scatter::{degenerate_band, left_barrier_action, right_barrier_action};
use super::{real_turning_points, ResonanceMethod, ResonanceResult, Solver, SolverOptions};
use crate::contour::adaptive_gk;
use crate::error::{Error, Result};
use crate::potential::{build_effective_q, EffectiveQ, RationalPotential};
use crate::stokes::SectorLabel;

const SECANT_TOL: f64 = 1e-10;
const SECANT_MAX: usize = 50;

/// `G(E)` of the resonance condition and `−ρ e^{A/ħ}` (equal to 1 at a root).
pub fn resonance_function(solver: &Solver) -> Result<Complex64> {
    Ok(condition(solver)?.0)
}

fn condition(solver: &Solver) -> Result<(Complex64, Complex64)> {
    use SectorLabel::*;
    let hb = solver.q().hbar;
    let c = |x, y| solver.chi_between(x, y);
    let rho = c(One, ThreeBar)? * c(TwoBar, Three)? / (c(One, Three)? * c(TwoBar, ThreeBar)?);
    let a = well_action(solver.q(), Some(solver))?;
    Ok(((-a / hb).exp() + rho, -rho * (a / hb).exp()))
}

/// `∫ dx / √|q|` between the two real turning points of the well.
pub(crate) fn well_period(q: &EffectiveQ) -> Result<f64> {
    let tps = real_turning_points(q)?;
    let (a, b) = super::bound::inner_pair(q, &tps)?;
    let (a, b) = (tps[a].re, tps[b].re);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    // x = m + h sin θ removes the inverse square-root end singularities
    let mut f = |t: f64| {
        let th = std::f64::consts::PI * (t - 0.5);
        let x = m + h * th.sin();
        let v = q.q(Complex64::new(x, 0.0)).norm();
        Complex64::new(std::f64::consts::PI * h * th.cos() / v.sqrt(), 0.0)
    };
    Ok(adaptive_gk(&mut f, 1e-12, 40)?.0.re)
}

pub fn resonances(pot: &RationalPotential, hbar: f64, window: (f64, f64), method: ResonanceMethod) -> Result<Vec<ResonanceResult>> {
    resonances_with(pot, hbar, window, method, SolverOptions::default())
}

pub fn resonances_with(
    pot: &RationalPotential,
    hbar: f64,
    window: (f64, f64),
    method: ResonanceMethod,
    options: SolverOptions,
) -> Result<Vec<ResonanceResult>> {
    let (lo, hi) = window;
    let (v_top, band) = degenerate_band(pot, hbar).ok_or(Error::GraphDegenerate("no barrier on the real axis".into()))?;
    // quasi-bound states live between the asymptotic level and the barrier
    // top; next to the top the turning points nearly collide
    let (a0, b0) = (lo.max(asymptotic_value(pot)), hi.min(v_top - band));
    let solver_at = |e: f64| -> Result<Solver> {
        let q = build_effective_q(pot, Complex64::new(e, 0.0), hbar)?;
        Solver::with_options(&q, options)
    };
    let mut out = Vec::new();
    match method {
        ResonanceMethod::Jwkb => {
            let jq = |e: f64| EffectiveQ::without_langer(pot, Complex64::new(e, 0.0), hbar);
            let phase = |e: f64| -> Result<f64> {
                let a = well_action(&jq(e)?, None)?;
                Ok((-(a / hbar).exp()).arg())
            };
            for (a, b) in phase_brackets(&phase, a0, b0) {
                let (e0, iters) = brent(&phase, a, b, 1e-14)?;
                let q = jq(e0)?;
                let period = well_period(&q)?;
                let k2 = right_barrier_action(&q)?;
                let gamma = 2.0 * hbar / period * (k2.re / hbar).exp();
                out.push(ResonanceResult {
                    e0,
                    gamma,
                    method,
                    classical_period: Some(period),
                    width_ratio: gamma / (v_top - e0),
                    iterations: iters,
                });
            }
        }
        ResonanceMethod::ComplexRoot | ResonanceMethod::Perturbative => {
            // Real seed: the phase condition on the real axis.
            let phase = |e: f64| -> Result<f64> { Ok(condition(&solver_at(e)?)?.1.arg()) };
            for (a, b) in phase_brackets(&phase, a0, b0) {
                let (e0, iters) = brent(&phase, a, b, 1e-14)?;
                let base = solver_at(e0)?;
                let r = if method == ResonanceMethod::Perturbative {
                    let gamma = perturbative_width(&base)?;
                    let period = well_period(base.q())?;
                    ResonanceResult {
                        e0,
                        gamma,
                        method,
                        classical_period: Some(period),
                        width_ratio: gamma / (v_top - e0),
                        iterations: iters,
                    }
                } else {
                    let z0 = Complex64::new(e0, 0.0);
                    let g = |e: Complex64| -> Result<Complex64> {
                        if e == z0 {
                            return Ok(condition(&base)?.0);
                        }
                        Ok(condition(&base.at_energy(e)?)?.0)
                    };
                    let step = perturbative_width(&base).ok().filter(|w| *w > 0.0).map_or(1e-8, |w| 0.5 * w);
                    let (root, _, n) = complex_secant(g, z0, z0 - Complex64::new(0.0, step), SECANT_TOL, SECANT_MAX)?;
                    let gamma = -2.0 * root.im;
                    if !(gamma > 0.0) {
                        return Err(Error::SeedDivergence { seed: z0 });
                    }
                    ResonanceResult {
                        e0: root.re,
                        gamma,
                        method,
                        classical_period: None,
                        width_ratio: gamma / (v_top - root.re),
                        iterations: iters + n,
                    }
                };
                out.push(r);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoResonanceInWindow { lo, hi });
    }
    Ok(out)
}

/// First order in `Γ` of the resonance condition at real `E₀`.
fn perturbative_width(solver: &Solver) -> Result<f64> {
    use SectorLabel::*;
    let q = solver.q();
    let hb = q.hbar;
    let tau = well_period(q)?;
    let c = |x, y| solver.chi_between(x, y);
    let c33 = c(Three, ThreeBar)?;
    let k1 = left_barrier_action(q)?;
    let k2 = right_barrier_action(q)?;
    let g = hb / tau * c33 * ((-k1 / hb).exp() / c(One, Three)?.norm_sqr() + (k2 / hb).exp() / c(Two, Three)?.norm_sqr());
    Ok(g.re)
}
