//! Radial Coulomb problem `V_l = −α/r + ħ² l(l+1)/r²`.
//!
//! With the Langer term the effective potential is
//! `Ṽ_l = −α/r + ħ²(l+½)²/r²`. Bound states join `Ψ_1` (recessive at +∞) to
//! `Ψ_3` (regular at `r = 0`). The two χ-factors in that matching are complex
//! conjugate and cancel, leaving `(i/ħ)∮ √(Ṽ_l − E) = (2k+1)π`.
//! Above threshold `S_l = χ_{1̄→3}/χ_{1→3}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::roots::brent;
use super::{pair_loop, real_turning_points, Solver, SolverOptions, SpectralMethod, SpectralResult};
use crate::chi::{chi_series_eval, omega_integral_to, series_coefficients_between, SeriesEnd};
use crate::error::{Error, Result};
use crate::potential::{build_effective_q, EffectiveQ, RationalPotential};
use crate::stokes::{plan_canonical_path_with, SectorLabel};

fn coulomb_q(alpha: f64, l: u32, hbar: f64, e: f64, langer: bool) -> Result<EffectiveQ> {
    let pot = RationalPotential::coulomb(alpha, l, hbar);
    let e = Complex64::new(e, 0.0);
    if langer {
        build_effective_q(&pot, e, hbar)
    } else {
        EffectiveQ::without_langer(&pot, e, hbar)
    }
}

/// `(i/ħ)∮ √q` around the classically allowed interval, taken positive.
fn loop_phase(q: &EffectiveQ) -> Result<Complex64> {
    let tps: Vec<Complex64> = real_turning_points(q)?.into_iter().filter(|r| r.re > 0.0).collect();
    let (a, b) = match tps.as_slice() {
        [a, b] => (*a, *b),
        // without a centrifugal barrier the interval starts at the pole
        [b] => (Complex64::new(0.0, 0.0), *b),
        _ => return Err(Error::GraphDegenerate(format!("{} positive turning points", tps.len()))),
    };
    let v = Complex64::new(0.0, 1.0) * pair_loop(q, a, b)? / q.hbar;
    Ok(if v.re < 0.0 { -v } else { v })
}

/// Levels `k = 0..=k_max` of the closed-loop condition.
pub fn coulomb_levels(alpha: f64, l: u32, hbar: f64, k_max: usize) -> Result<Vec<SpectralResult>> {
    coulomb_levels_with(alpha, l, hbar, k_max, true)
}

/// As [`coulomb_levels`]; `langer = false` drops the Langer term, which
/// leaves the semiclassical series divergent at `r = 0` and shifts the levels.
pub fn coulomb_levels_with(alpha: f64, l: u32, hbar: f64, k_max: usize, langer: bool) -> Result<Vec<SpectralResult>> {
    if !(alpha > 0.0) {
        return Err(Error::Unsupported(format!("alpha must be positive, got {alpha}")));
    }
    let phase = |e: f64| -> Result<f64> { Ok(loop_phase(&coulomb_q(alpha, l, hbar, e, langer)?)?.re) };
    // bottom of the effective well (with the Langer term it is finite)
    let c = if langer {
        hbar * hbar * (l as f64 + 0.5).powi(2)
    } else {
        hbar * hbar * (l * (l + 1)) as f64
    };
    let mut out = Vec::new();
    for k in 0..=k_max {
        let target = (2 * k + 1) as f64 * std::f64::consts::PI;
        let f = |e: f64| -> Result<f64> { Ok(phase(e)? - target) };
        let mut lo = if c > 0.0 { -alpha * alpha / (4.0 * c) * (1.0 - 1e-3) } else { -alpha * alpha / (hbar * hbar) };
        while f(lo)? > 0.0 {
            lo *= 4.0;
            if lo < -1e12 {
                return Err(Error::NoRootInWindow { lo, hi: 0.0 });
            }
        }
        let mut hi = lo / 4.0;
        while f(hi)? < 0.0 {
            hi /= 4.0;
            if hi > -1e-12 {
                return Err(Error::NoRootInWindow { lo, hi });
            }
        }
        let (e, iters) = brent(f, lo, hi, 1e-15)?;
        let v = loop_phase(&coulomb_q(alpha, l, hbar, e, langer)?)?;
        out.push(SpectralResult {
            energy: Complex64::new(e, 0.0),
            residual: (v - target).norm(),
            method: SpectralMethod::ExactCondition,
            iterations: iters,
        });
    }
    Ok(out)
}

/// `|arg χ_{2→3} + arg χ_{2̄→3}|` at energy `e < 0`: the two factors in the
/// bound-state matching are conjugate, so at a level this vanishes.
pub fn coulomb_chi_cancellation(alpha: f64, l: u32, hbar: f64, e: f64) -> Result<f64> {
    let q = coulomb_q(alpha, l, hbar, e, true)?;
    let s = Solver::new(&q)?;
    let a = s.chi_between(SectorLabel::Two, SectorLabel::Three)?;
    let b = s.chi_between(SectorLabel::TwoBar, SectorLabel::Three)?;
    Ok((a.arg() + b.arg()).abs())
}

/// `∫ ω` from half the innermost turning point radius down to `r = 0` at
/// energy `e`. Converges with the Langer term; without it (`langer = false`)
/// the integrand is not integrable at the origin and the result is
/// `QuadratureNotConverged`.
pub fn coulomb_omega_near_origin(alpha: f64, l: u32, hbar: f64, e: f64, langer: bool) -> Result<Complex64> {
    let q = coulomb_q(alpha, l, hbar, e, langer)?;
    let r_tp = real_turning_points(&q)?.into_iter().map(|r| r.re).filter(|&r| r > 0.0).fold(f64::INFINITY, f64::min);
    let x0 = Complex64::new(if r_tp.is_finite() { 0.5 * r_tp } else { 1.0 }, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    omega_integral_to(&q, x0, zero, q.qt(x0).sqrt())
}

/// Graph tolerances shrunk with the distance between the pole at `r = 0` and
/// its nearest turning point, which goes to zero like `ħ²`.
fn scaled_options(q: &EffectiveQ) -> Result<SolverOptions> {
    let d = q.find_turning_points()?.iter().map(|t| t.location.norm()).fold(f64::INFINITY, f64::min);
    let f = (d / 0.1).min(1.0);
    let mut o = SolverOptions::default();
    o.graph.clearance *= f;
    o.graph.pole_radius *= f;
    o.graph.hop_radius *= f;
    Ok(o)
}

/// Scattering data of one partial wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoulombPhase {
    /// `S_l = χ_{1̄→3} / χ_{1→3}`.
    pub s: Complex64,
    /// Phase of `χ_{1̄→3}`.
    pub phase: f64,
    /// `| |S_l| − 1 |`.
    pub unitarity_defect: f64,
    /// First-order semiclassical phase `Im(−(ħ/2) ∫_{1̄}^{3} ω)`.
    pub jwkb_phase: f64,
}

pub fn coulomb_phase(alpha: f64, l: u32, hbar: f64, e: f64) -> Result<CoulombPhase> {
    if !(e > 0.0) {
        return Err(Error::Unsupported(format!("Coulomb scattering needs E > 0, got {e}")));
    }
    let q = coulomb_q(alpha, l, hbar, e, true)?;
    let solver = Solver::with_options(&q, scaled_options(&q)?)?;
    let i1b = solver.sector(SectorLabel::OneBar)?;
    let i3 = solver.sector(SectorLabel::Three)?;
    let c1b3 = solver.chi(i1b, i3)?.chi.value;
    let c13 = solver.chi_between(SectorLabel::One, SectorLabel::Three)?;
    let s = c1b3 / c13;
    // first-order term along the same canonical route
    let cp = plan_canonical_path_with(solver.graph(), i1b, i3, solver.options().route)?;
    let coeffs = series_coefficients_between(&q, &cp.path, 1, SeriesEnd::Infinity, SeriesEnd::Pole(Complex64::new(0.0, 0.0)))?;
    let first = chi_series_eval(&coeffs, 1, hbar).value - 1.0;
    Ok(CoulombPhase { s, phase: c1b3.arg(), unitarity_defect: (s.norm() - 1.0).abs(), jwkb_phase: first.im })
}
