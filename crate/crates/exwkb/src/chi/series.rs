//! Semiclassical coefficients `I_n(x, x₀)`.
//!
//! `I_0 = 1`, `I_n(x, x₀) = ∫_{x₀}^{x} D̃ I_{n−1}` with
//! `D̃κ = s^{-1} κ'' + (s^{-1})' κ' + ω κ`. The nested form differentiates
//! integrated data at every level, which amplifies rounding quickly. We use the
//! equivalent logarithmic form instead: with `ε = −ħ/2`,
//! `Σ εⁿ Iₙ(x, x₀) = exp(Σ εᵐ ∫_{x₀}^{x} γ_m)`, where
//! `γ_1 = ω` and `s γ_{m+1} = γ_m' − (q̃'/(2q̃)) γ_m + Σ_{j+l=m} γ_j γ_l`.
//! The `γ_m` come from exact Taylor jets of the rational `q̃`, so only
//! integration is numerical. Ends at a double pole or at infinity are handled
//! through Taylor expansions sampled on a circle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ChiMethod, ChiValue};
use crate::contour::{sqrt_near, ContourPath};
use crate::error::{Error, Result};
use crate::potential::{series_div, EffectiveQ};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const NODES: usize = 32;
pub const MAX_ORDER: usize = 6;

/// Where the coefficients are anchored beyond the ends of the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SeriesEnd {
    /// The path end itself.
    Path,
    /// A double pole next to the path end.
    Pole(Complex64),
    /// Infinity, reached radially from the path end.
    Infinity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    /// `I_0 .. I_N` at the target relative to the base.
    pub i: Vec<Complex64>,
    /// Constants of the general solution; `None` for the sector-anchored form.
    pub c: Option<Vec<Complex64>>,
    pub base: SeriesEnd,
    pub target: SeriesEnd,
    pub path: ContourPath,
}

struct Cheb {
    theta: Vec<f64>,
}

impl Cheb {
    fn new(m: usize) -> Self {
        Cheb { theta: (0..m).map(|j| std::f64::consts::PI * (j as f64 + 0.5) / m as f64).collect() }
    }

    /// τ at node j; nodes are listed with decreasing τ.
    fn tau(&self, j: usize) -> f64 {
        0.5 * (1.0 + self.theta[j].cos())
    }

    fn coeffs(&self, f: &[Complex64]) -> Vec<Complex64> {
        let m = f.len();
        let mut c = vec![ZERO; m];
        for (k, ck) in c.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (j, fj) in f.iter().enumerate() {
                acc += fj * (k as f64 * self.theta[j]).cos();
            }
            *ck = acc * (2.0 / m as f64);
        }
        c[0] *= 0.5;
        c
    }

    /// Antiderivative in ξ vanishing at ξ = −1.
    fn integ(c: &[Complex64]) -> Vec<Complex64> {
        let m = c.len();
        let get = |k: usize| c.get(k).copied().unwrap_or(ZERO);
        let mut a = vec![ZERO; m + 1];
        a[1] = get(0) - 0.5 * get(2);
        for k in 2..=m {
            a[k] = (get(k - 1) - get(k + 1)) / (2 * k) as f64;
        }
        let mut c0 = ZERO;
        for (k, ak) in a.iter().enumerate().skip(1) {
            c0 -= if k % 2 == 0 { *ak } else { -*ak };
        }
        a[0] = c0;
        a
    }
}

/// Coefficients from the path start to the path end.
pub fn series_coefficients(q: &EffectiveQ, path: &ContourPath, n: usize) -> Result<SeriesCoefficients> {
    series_coefficients_between(q, path, n, SeriesEnd::Path, SeriesEnd::Path)
}

/// Coefficients `I_n(target, base)` along `path`, optionally extended at either
/// end to a double pole or to infinity. The branch of `√q̃` is the path's own.
pub fn series_coefficients_between(
    q: &EffectiveQ,
    path: &ContourPath,
    n: usize,
    base: SeriesEnd,
    target: SeriesEnd,
) -> Result<SeriesCoefficients> {
    if n > MAX_ORDER {
        return Err(Error::Unsupported(format!("series order {n} exceeds {MAX_ORDER}")));
    }
    let mut g = vec![ZERO; n + 1];
    if n > 0 {
        let mut singular: Vec<Complex64> = q.poles().iter().map(|p| p.location).collect();
        singular.extend(q.find_turning_points()?.iter().map(|t| t.location));
        let cheb = Cheb::new(NODES);
        let s0 = path.samples[0].sqrt_q;
        let mut s_here = s0;
        for w in path.waypoints.windows(2) {
            for (a, b) in split_line(w[0], w[1], &singular) {
                s_here = integrate_piece(q, a, b, s_here, &cheb, n, &mut g)?;
            }
        }
        let x0 = path.start();
        let xe = path.end();
        match base {
            SeriesEnd::Path => {}
            SeriesEnd::Pole(z) => {
                let c = circle_taylor(q, z, x0, s0, n, &singular)?;
                for m in 1..=n {
                    g[m] += integrate_taylor(&c[m], x0 - z);
                }
            }
            SeriesEnd::Infinity => {
                let c = infinity_taylor(q, x0, s0, n)?;
                for m in 1..=n {
                    g[m] -= tail_at_infinity(&c[m], 1.0 / x0)?;
                }
            }
        }
        match target {
            SeriesEnd::Path => {}
            SeriesEnd::Pole(z) => {
                let c = circle_taylor(q, z, xe, s_here, n, &singular)?;
                for m in 1..=n {
                    g[m] -= integrate_taylor(&c[m], xe - z);
                }
            }
            SeriesEnd::Infinity => {
                let c = infinity_taylor(q, xe, s_here, n)?;
                for m in 1..=n {
                    g[m] += tail_at_infinity(&c[m], 1.0 / xe)?;
                }
            }
        }
    }
    // I_n = [εⁿ] exp(Σ εᵐ G_m)
    let mut i = vec![ZERO; n + 1];
    i[0] = Complex64::new(1.0, 0.0);
    for k in 1..=n {
        let mut acc = ZERO;
        for j in 1..=k {
            acc += g[j] * i[k - j] * j as f64;
        }
        i[k] = acc / k as f64;
    }
    Ok(SeriesCoefficients { i, c: None, base, target, path: path.clone() })
}

fn split_line(a: Complex64, b: Complex64, singular: &[Complex64]) -> Vec<(Complex64, Complex64)> {
    let len = (b - a).norm();
    if len == 0.0 {
        return Vec::new();
    }
    let d = singular.iter().map(|&z| seg_dist(a, b, z)).fold(f64::INFINITY, f64::min);
    let max_len = (0.3 * d).clamp(1e-6, 1.0).max(0.05 * a.norm().min(b.norm()));
    let k = (len / max_len).ceil() as usize;
    (0..k)
        .map(|j| (a + (b - a) * (j as f64 / k as f64), a + (b - a) * ((j + 1) as f64 / k as f64)))
        .collect()
}

fn seg_dist(a: Complex64, b: Complex64, z: Complex64) -> f64 {
    let e = b - a;
    let t = (((z - a) * e.conj()).re / e.norm_sqr()).clamp(0.0, 1.0);
    (a + e * t - z).norm()
}

/// Adds `∫_a^b γ_m` to `g[m]`; returns the branch at `b`.
fn integrate_piece(
    q: &EffectiveQ,
    a: Complex64,
    b: Complex64,
    s_a: Complex64,
    cheb: &Cheb,
    n: usize,
    g: &mut [Complex64],
) -> Result<Complex64> {
    let m = cheb.theta.len();
    let mut vals = vec![vec![ZERO; m]; n + 1];
    let mut cur = s_a;
    for j in (0..m).rev() {
        let x = a + (b - a) * cheb.tau(j);
        cur = sqrt_near(q.qt(x), cur);
        let gm = gammas(q, x, cur, n)?;
        for k in 1..=n {
            vals[k][j] = gm[k];
        }
    }
    for k in 1..=n {
        let anti = Cheb::integ(&cheb.coeffs(&vals[k]));
        let total: Complex64 = anti.iter().sum();
        g[k] += total * 0.5 * (b - a);
    }
    Ok(sqrt_near(q.qt(b), cur))
}

// truncated power-series helpers
fn smul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| (0..=k).map(|j| a.get(j).copied().unwrap_or(ZERO) * b.get(k - j).copied().unwrap_or(ZERO)).sum())
        .collect()
}

fn sderiv(a: &[Complex64]) -> Vec<Complex64> {
    a.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
}

fn ssqrt(a: &[Complex64], r0: Complex64) -> Vec<Complex64> {
    let n = a.len();
    let mut r = vec![ZERO; n];
    r[0] = r0;
    for k in 1..n {
        let mut acc = a[k];
        for j in 1..k {
            acc -= r[j] * r[k - j];
        }
        r[k] = acc / (2.0 * r0);
    }
    r
}

/// `γ_1 .. γ_n` at `x` on the branch `s` (index 0 unused).
fn gammas(q: &EffectiveQ, x: Complex64, s: Complex64, n: usize) -> Result<Vec<Complex64>> {
    let t = 2 * n + 3;
    let (num, den) = q.cleared();
    let qt = series_div(num.taylor_shift(x).coeffs(), den.taylor_shift(x).coeffs(), t);
    if !qt[0].is_finite() || qt[0] == ZERO {
        return Err(Error::EvaluationAtSingularity { at: x });
    }
    let mut delta = vec![ZERO; t];
    for &z in &q.langer_poles {
        let a = x - z;
        let mut p = 1.0 / (a * a);
        for (j, d) in delta.iter_mut().enumerate() {
            *d += 0.25 * (j as f64 + 1.0) * p;
            p *= -1.0 / a;
        }
    }
    let sq = ssqrt(&qt, s);
    let d1 = sderiv(&qt);
    let d2 = sderiv(&d1);
    let l1 = series_div(&d1, &qt, t - 1); // q̃'/q̃
    let kk: Vec<Complex64> = {
        let l2 = smul(&l1, &l1, t - 2);
        let r2 = series_div(&d2, &qt, t - 2);
        (0..t - 2).map(|k| 5.0 / 16.0 * l2[k] - 0.25 * r2[k] + delta[k]).collect()
    };
    let half_l: Vec<Complex64> = l1.iter().map(|v| v * 0.5).collect();
    let mut gam: Vec<Vec<Complex64>> = vec![Vec::new(); n + 1];
    gam[1] = series_div(&kk, &sq, t - 2);
    for m in 1..n {
        let len = gam[m].len() - 1;
        let mut rhs = sderiv(&gam[m]);
        let lg = smul(&half_l, &gam[m], len);
        for k in 0..len {
            rhs[k] -= lg[k];
        }
        for j in 1..m {
            let p = smul(&gam[j], &gam[m - j], len);
            for k in 0..len {
                rhs[k] += p[k];
            }
        }
        rhs.truncate(len);
        gam[m + 1] = series_div(&rhs, &sq, len);
    }
    Ok(gam.iter().map(|v| v.first().copied().unwrap_or(ZERO)).collect())
}

const CIRCLE: usize = 64;

/// Taylor coefficients of each `γ_m` at the double pole `z`, sampled on the
/// circle through `x` (branch `s` at `x`).
fn circle_taylor(
    q: &EffectiveQ,
    z: Complex64,
    x: Complex64,
    s: Complex64,
    n: usize,
    singular: &[Complex64],
) -> Result<Vec<Vec<Complex64>>> {
    let u0 = x - z;
    let rc = u0.norm();
    let d = singular
        .iter()
        .filter(|&&p| (p - z).norm() > 1e-12)
        .map(|&p| (p - z).norm())
        .fold(f64::INFINITY, f64::min);
    if rc >= 0.8 * d {
        return Err(Error::QuadratureNotConverged(format!("circle around {z} is too close to another singular point")));
    }
    sample_circle(q, n, s, |th| z + u0 * Complex64::from_polar(1.0, th), |k, th| {
        // u^k = u0^k e^{ikθ}
        u0.powu(k as u32) * Complex64::from_polar(1.0, k as f64 * th)
    })
}

/// Coefficients in `t = 1/x` of each `γ_m`, sampled on the circle `|x| = |x0|`.
fn infinity_taylor(q: &EffectiveQ, x0: Complex64, s: Complex64, n: usize) -> Result<Vec<Vec<Complex64>>> {
    let t0 = 1.0 / x0;
    sample_circle(q, n, s, |th| x0 * Complex64::from_polar(1.0, th), |k, th| {
        t0.powu(k as u32) * Complex64::from_polar(1.0, -(k as f64) * th)
    })
}

fn sample_circle<P, B>(q: &EffectiveQ, n: usize, s: Complex64, point: P, basis: B) -> Result<Vec<Vec<Complex64>>>
where
    P: Fn(f64) -> Complex64,
    B: Fn(usize, f64) -> Complex64,
{
    let sub = 8;
    let mut vals = vec![vec![ZERO; CIRCLE]; n + 1];
    let mut cur = s;
    for j in 0..CIRCLE {
        let th = std::f64::consts::TAU * j as f64 / CIRCLE as f64;
        if j > 0 {
            for k in 1..=sub {
                let tk = std::f64::consts::TAU * ((j - 1) as f64 + k as f64 / sub as f64) / CIRCLE as f64;
                cur = sqrt_near(q.qt(point(tk)), cur);
            }
        }
        let gm = gammas(q, point(th), cur, n)?;
        for m in 1..=n {
            vals[m][j] = gm[m];
        }
    }
    // the branch must close around the circle
    let mut back = cur;
    for k in 1..=sub {
        let tk = std::f64::consts::TAU * ((CIRCLE - 1) as f64 + k as f64 / sub as f64) / CIRCLE as f64;
        back = sqrt_near(q.qt(point(tk)), back);
    }
    if (back - s).norm() > 1e-8 * s.norm() {
        return Err(Error::BranchNotClosed);
    }
    let mut out = vec![Vec::new(); n + 1];
    for m in 1..=n {
        out[m] = (0..CIRCLE / 2)
            .map(|k| {
                let mut acc = ZERO;
                for j in 0..CIRCLE {
                    let th = std::f64::consts::TAU * j as f64 / CIRCLE as f64;
                    acc += vals[m][j] / basis(k, th);
                }
                acc / CIRCLE as f64
            })
            .collect();
    }
    Ok(out)
}

/// `∫_z^{z+u} Σ c_k (x−z)^k dx`.
fn integrate_taylor(c: &[Complex64], u: Complex64) -> Complex64 {
    let mut acc = ZERO;
    let mut p = u;
    for (k, ck) in c.iter().enumerate() {
        acc += ck * p / (k + 1) as f64;
        p *= u;
    }
    acc
}

/// `∫_x^∞ γ dx` for `γ = Σ c_k t^k`, `t = 1/x`.
fn tail_at_infinity(c: &[Complex64], t: Complex64) -> Result<Complex64> {
    let scale = c.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    if c[0].norm() > 1e-8 * scale || c[1].norm() > 1e-8 * scale {
        return Err(Error::QuadratureNotConverged("integrand does not decay like 1/x² at infinity".into()));
    }
    let mut acc = ZERO;
    let mut p = t;
    for (k, ck) in c.iter().enumerate().skip(2) {
        acc += ck * p / (k - 1) as f64;
        p *= t;
    }
    Ok(acc)
}

/// `Σ_{n≤N} (−σħ/2)^n I_n`; `σ = 1` when the coefficients were taken on the
/// recessive branch of the solution. The error estimate is the last term.
pub fn chi_series_eval(coeffs: &SeriesCoefficients, sigma: i8, hbar: f64) -> ChiValue {
    let f = -(sigma as f64) * hbar / 2.0;
    let mut value = ZERO;
    let mut last = 0.0;
    let mut p = 1.0;
    for i in &coeffs.i {
        last = (i * p).norm();
        value += i * p;
        p *= f;
    }
    let order = coeffs.i.len() - 1;
    ChiValue {
        value,
        sigma,
        path: coeffs.path.clone(),
        error_estimate: if order == 0 { 0.0 } else { last },
        method: ChiMethod::Series { order },
    }
}
