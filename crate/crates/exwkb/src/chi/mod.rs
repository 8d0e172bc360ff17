//! χ-factors of fundamental solutions.
//!
//! A fundamental solution is written `Ψ_k = q̃^{-1/4} e^{W/ħ} χ_k`, with `W`
//! and `q̃^{1/4}` taken on the branch of `s = √q̃` that is recessive toward the
//! sector endpoint `z_k`. The factor solves
//!
//! `χ'' + (2s/ħ − q̃'/(2q̃)) χ' + (5q̃'²/(16q̃²) − q̃''/(4q̃) + δ) χ = 0`
//!
//! and tends to 1 at `z_k`. Start data near the endpoint come from the
//! Riccati expansion of `ħΨ'/Ψ` (convergent at a Langer-regularised double
//! pole, asymptotic at infinity), so no offset error enters.

mod series;

pub use series::{chi_series_eval, series_coefficients, series_coefficients_between, SeriesCoefficients, SeriesEnd};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contour::{sqrt_near, track_branch, ContourPath};
use crate::error::{Error, Result};
use crate::potential::EffectiveQ;
use crate::stokes::{sector_arc, CanonicalPath, Endpoint, StokesGraph};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiOptions {
    /// Relative tolerance of the embedded Runge–Kutta pair.
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Terms kept in the Riccati expansions used for start data.
    pub series_terms: usize,
}

impl Default for ChiOptions {
    fn default() -> Self {
        ChiOptions { rtol: 1e-10, atol: 1e-14, max_steps: 2_000_000, series_terms: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChiMethod {
    Ode,
    Series { order: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiValue {
    pub value: Complex64,
    pub sigma: i8,
    pub path: ContourPath,
    pub error_estimate: f64,
    pub method: ChiMethod,
}

/// `χ`, `χ'` and the branch `s` at a point next to a sector endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartData {
    pub x: Complex64,
    pub chi: Complex64,
    pub dchi: Complex64,
    pub s: Complex64,
    /// Size of the first omitted term of the expansion of `ln χ`.
    pub truncation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiState {
    pub x: Complex64,
    pub chi: Complex64,
    pub dchi: Complex64,
    pub s: Complex64,
    pub steps: usize,
}

/// `ω = δ/s − q̃''/(4s³) + 5q̃'²/(16s⁵)` with `s` the root of `q̃(x)` nearest `seed`.
pub fn omega(q: &EffectiveQ, x: Complex64, seed: Complex64) -> Result<Complex64> {
    let d = q.derivs(x);
    if !(d.q.is_finite() && d.d1.is_finite() && d.d2.is_finite()) || d.q == ZERO {
        return Err(Error::EvaluationAtSingularity { at: x });
    }
    let s = sqrt_near(d.q, seed);
    Ok((d.delta - d.d2 / (4.0 * d.q) + 5.0 / 16.0 * d.d1 * d.d1 / (d.q * d.q)) / s)
}

/// `∫_{x0}^{z} ω` toward a singular point `z`, on the branch of `√q̃` nearest
/// `seed` at `x0`. The segment is cut into pieces halving in length; the
/// integral is accepted once the pieces die out and declared divergent
/// (`QuadratureNotConverged`) when they stop shrinking.
///
/// Close to a pole the cleared polynomials lose digits and the pieces become
/// noisy. If a piece can no longer be resolved while the earlier ones shrink
/// geometrically, the tail is extrapolated from the partial sums.
pub fn omega_integral_to(q: &EffectiveQ, x0: Complex64, z: Complex64, seed: Complex64) -> Result<Complex64> {
    let d = x0 - z;
    let mut s_prev = sqrt_near(q.qt(x0), seed);
    let mut sum = ZERO;
    let mut last = f64::INFINITY;
    let mut stalled = 0;
    let mut sums: Vec<Complex64> = Vec::new();
    for j in 0..80 {
        let a = z + d * 0.5f64.powi(j);
        let b = z + d * 0.5f64.powi(j + 1);
        let qa = q.qt(a);
        let sa = sqrt_near(qa, s_prev);
        let mut err = None;
        let mut f = |t: f64| {
            let x = a + (b - a) * t;
            let guess = sa * (q.qt(x) / qa).sqrt();
            match omega(q, x, guess) {
                Ok(w) => w * (b - a),
                Err(e) => {
                    err.get_or_insert(e);
                    ZERO
                }
            }
        };
        let piece = match crate::contour::adaptive_gk(&mut f, 1e-12, 30) {
            Ok((p, _)) => p,
            Err(e @ Error::QuadratureNotConverged(_)) => return geometric_tail(&sums).ok_or(e),
            Err(e) => return Err(e),
        };
        if let Some(e) = err {
            return Err(e);
        }
        s_prev = sqrt_near(q.qt(b), sa * (q.qt(b) / qa).sqrt());
        sum += piece;
        sums.push(sum);
        let size = piece.norm();
        if size <= 1e-13 * (1.0 + sum.norm()) {
            return Ok(sum);
        }
        stalled = if j >= 4 && size >= 0.9 * last { stalled + 1 } else { 0 };
        if stalled >= 8 {
            break;
        }
        last = size;
    }
    Err(Error::QuadratureNotConverged(format!("integral of omega diverges toward {z}")))
}

/// Limit of partial sums whose increments shrink geometrically, by two rounds
/// of Aitken's Δ². `None` unless the last increments shrink steadily.
fn geometric_tail(sums: &[Complex64]) -> Option<Complex64> {
    if sums.len() < 6 {
        return None;
    }
    let s = &sums[sums.len() - 5..];
    let steps: Vec<Complex64> = sums[sums.len() - 6..].windows(2).map(|w| w[1] - w[0]).collect();
    if steps.windows(2).any(|w| w[1].norm() > 0.7 * w[0].norm()) {
        return None;
    }
    let aitken = |v: &[Complex64]| -> Vec<Complex64> {
        v.windows(3)
            .map(|w| {
                let den = w[2] - 2.0 * w[1] + w[0];
                if den == ZERO { w[2] } else { w[2] - (w[2] - w[1]) * (w[2] - w[1]) / den }
            })
            .collect()
    };
    aitken(&aitken(s)).last().copied()
}

/// Reciprocal of a power series with `b[0] ≠ 0`, and the log-derivative `Q'/Q`.
fn log_derivative(qs: &[Complex64], n: usize) -> Vec<Complex64> {
    let dq: Vec<Complex64> = (0..n).map(|k| qs.get(k + 1).copied().unwrap_or(ZERO) * (k + 1) as f64).collect();
    let mut l = vec![ZERO; n];
    for k in 0..n {
        let mut acc = dq[k];
        for j in 0..k {
            acc -= l[j] * qs[k - j];
        }
        l[k] = acc / qs[0];
    }
    l
}

/// Start data at `x` for the solution recessive at the double pole `z` of `q̃`.
pub fn pole_start_data(q: &EffectiveQ, z: Complex64, x: Complex64, nterms: usize) -> Result<StartData> {
    let pole = q
        .poles()
        .iter()
        .find(|p| (p.location - z).norm() < 1e-9 * (1.0 + z.norm()))
        .ok_or_else(|| Error::Unsupported(format!("{z} is not a pole of the potential")))?;
    if pole.order > 2 || !q.has_langer() {
        return Err(Error::Unsupported(format!(
            "start data need a Langer-regularised pole of order at most 2 (order {} at {z})",
            pole.order
        )));
    }
    let hb = q.hbar;
    let n = nterms;
    // q and q̃ as series of u^{j−2}
    let mut qc = q.laurent_q_at_pole(z, pole.order, n + 3);
    for _ in pole.order..2 {
        qc.insert(0, ZERO);
    }
    let qt = q.laurent_qt_at_pole(z, pole.order, n + 3);
    let sc = {
        let r = qt[0].sqrt();
        if r.re.abs() < 1e-12 * r.norm() {
            return Err(Error::BranchAmbiguous { at: z });
        }
        if r.re < 0.0 {
            -r
        } else {
            r
        }
    };
    let ym1 = 0.5 * hb + sc;
    let mut y = vec![ZERO; n + 1];
    for k in 0..=n {
        let mut acc = qc[k + 1];
        for j in 0..k {
            acc -= y[j] * y[k - 1 - j];
        }
        y[k] = acc / (hb * k as f64 + 2.0 * ym1);
    }
    let mut r = vec![ZERO; n + 2];
    r[0] = sc;
    for k in 1..n + 2 {
        let mut acc = qt[k];
        for j in 1..k {
            acc -= r[j] * r[k - j];
        }
        r[k] = acc / (2.0 * sc);
    }
    let l = log_derivative(&qt, n);
    let g: Vec<Complex64> = (0..n).map(|k| (y[k] - r[k + 1]) / hb + l[k] / 4.0).collect();
    let u = x - z;
    let mut lnchi = ZERO;
    let mut gv = ZERO;
    let mut up = Complex64::new(1.0, 0.0);
    for (k, gk) in g.iter().enumerate() {
        gv += gk * up;
        up *= u;
        lnchi += gk * up / (k + 1) as f64;
    }
    let truncation = (g[n - 1] * up).norm() / n as f64 + (g[n - 2] * up / u).norm() / (n - 1) as f64;
    if !lnchi.is_finite() || truncation > 1e-13 * lnchi.norm().max(1.0) {
        return Err(Error::QuadratureNotConverged(format!(
            "pole expansion at {z} does not converge at radius {:.3e}",
            u.norm()
        )));
    }
    let mut s = ZERO;
    let mut up = 1.0 / u;
    for rk in &r {
        s += rk * up;
        up *= u;
    }
    let chi = lnchi.exp();
    Ok(StartData { x, chi, dchi: gv * chi, s, truncation })
}

/// Start data at the far point `x` for the solution recessive toward infinity
/// on the branch of `√q̃` closest to `s_ref`.
pub fn infinity_start_data(q: &EffectiveQ, x: Complex64, s_ref: Complex64, nterms: usize) -> Result<StartData> {
    let hb = q.hbar;
    let n = nterms;
    let (qc, qt) = q.taylor_at_infinity(n + 1)?;
    let mut y0 = qc[0].sqrt();
    if (y0 * s_ref.conj()).re < 0.0 {
        y0 = -y0;
    }
    let mut y = vec![ZERO; n];
    y[0] = y0;
    for k in 1..n {
        let mut acc = qc[k] + hb * (k as f64 - 1.0) * y[k - 1];
        for j in 1..k {
            acc -= y[j] * y[k - j];
        }
        y[k] = acc / (2.0 * y0);
    }
    let mut r = vec![ZERO; n];
    r[0] = y0;
    for k in 1..n {
        let mut acc = qt[k];
        for j in 1..k {
            acc -= r[j] * r[k - j];
        }
        r[k] = acc / (2.0 * y0);
    }
    let l = log_derivative(&qt, n);
    let mut g: Vec<Complex64> = (0..n).map(|k| (y[k] - r[k]) / hb).collect();
    for k in 0..n.saturating_sub(3) {
        g[k + 2] -= l[k] / 4.0;
    }
    // the expansion is asymptotic: stop near the smallest term
    let t = 1.0 / x;
    let nmax = (n - 3).min((2.0 * y0.norm() * x.norm() / hb).floor() as usize).max(3);
    let mut lnchi = ZERO;
    let mut gv = ZERO;
    let mut tp = t;
    for (k, gk) in g.iter().enumerate().take(nmax).skip(2) {
        lnchi -= gk * tp / (k - 1) as f64;
        tp *= t;
        gv += gk * tp;
    }
    let truncation = (g[nmax] * tp).norm() / (nmax - 1) as f64;
    let s = sqrt_near(q.qt(x), y0);
    let chi = lnchi.exp();
    Ok(StartData { x, chi, dchi: gv * chi, s, truncation })
}

// Dormand–Prince 5(4)
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn chi_rhs(q: &EffectiveQ, x: Complex64, s_ref: Complex64, y: [Complex64; 2]) -> ([Complex64; 2], Complex64) {
    let d = q.derivs(x);
    let s = sqrt_near(d.q, s_ref);
    let k = 5.0 / 16.0 * d.d1 * d.d1 / (d.q * d.q) - d.d2 / (4.0 * d.q) + d.delta;
    let dd = -(2.0 * s / q.hbar - d.d1 / (2.0 * d.q)) * y[1] - k * y[0];
    ([y[1], dd], s)
}

/// Integrates the χ equation along the polyline `pts`, which must start at `start.x`.
pub fn integrate_chi(q: &EffectiveQ, pts: &[Complex64], start: &StartData, opts: &ChiOptions) -> Result<ChiState> {
    let mut y = [start.chi, start.dchi];
    let mut s = start.s;
    let mut steps = 0usize;
    for seg in pts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = b - a;
        let ln = len.norm();
        if ln == 0.0 {
            continue;
        }
        let mut t = 0.0;
        let mut h = (0.05 / ln).min(1.0);
        while t < 1.0 - 1e-15 {
            let x = a + len * t;
            let hmax = 0.1 * x.norm().max(1.0) / ln;
            h = h.min(hmax).min(1.0 - t);
            if h * ln < 1e-13 * x.norm().max(1.0) || steps > opts.max_steps {
                return Err(Error::StiffnessFailure { at: x });
            }
            let mut k = [[ZERO; 2]; 7];
            let mut s_stage = s;
            for i in 0..7 {
                let mut yi = y;
                for (j, kj) in k.iter().enumerate().take(i) {
                    yi[0] += kj[0] * (h * A[i][j]);
                    yi[1] += kj[1] * (h * A[i][j]);
                }
                let (f, si) = chi_rhs(q, a + len * (t + C[i] * h), s, yi);
                k[i] = [f[0] * len, f[1] * len];
                s_stage = si;
            }
            let mut y5 = y;
            let mut y4 = y;
            for i in 0..7 {
                for c in 0..2 {
                    y5[c] += k[i][c] * (h * B5[i]);
                    y4[c] += k[i][c] * (h * B4[i]);
                }
            }
            let mut err = 0.0;
            for c in 0..2 {
                let sc = opts.atol + opts.rtol * y[c].norm().max(y5[c].norm());
                err += ((y5[c] - y4[c]).norm() / sc).powi(2);
            }
            let err = (err / 2.0).sqrt();
            let s_new = sqrt_near(q.qt(a + len * (t + h)), s_stage);
            let branch_ok = (s_new - s).norm() < 0.3 * s.norm().max(s_new.norm());
            if err <= 1.0 && branch_ok && y5.iter().all(|v| v.is_finite()) {
                y = y5;
                t += h;
                s = s_new;
                steps += 1;
            }
            let fac = if !branch_ok {
                0.25
            } else if err > 0.0 {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            h *= fac;
        }
    }
    Ok(ChiState { x: *pts.last().unwrap(), chi: y[0], dchi: y[1], s, steps })
}

/// χ at the end of `path` for the solution with the given start data, with an
/// error estimate from a rerun at half the tolerance.
pub fn chi_ode(q: &EffectiveQ, path: &ContourPath, start: &StartData, sigma: i8, opts: &ChiOptions) -> Result<ChiValue> {
    let a = integrate_chi(q, &path.waypoints, start, opts)?;
    let half = ChiOptions { rtol: opts.rtol / 2.0, atol: opts.atol / 2.0, ..*opts };
    let b = integrate_chi(q, &path.waypoints, start, &half)?;
    Ok(ChiValue {
        value: b.chi,
        sigma,
        path: path.clone(),
        error_estimate: 2.0 * (a.chi - b.chi).norm() + start.truncation * b.chi.norm(),
        method: ChiMethod::Ode,
    })
}

/// Data of the fundamental solution of a sector at a point on its start arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorPoint {
    pub sector: usize,
    pub start: StartData,
    /// Continuation of `q̃^{1/4}`, principal at the sector start.
    pub r: Complex64,
    /// `W` from the reference turning point on the recessive branch.
    pub action: Complex64,
}

pub fn sector_point(graph: &StokesGraph, k: usize, x: Complex64, opts: &ChiOptions) -> Result<SectorPoint> {
    let q = &graph.q;
    let sec = &graph.sectors[k];
    let mut s = sec.recessive_sqrt;
    let mut r = s.sqrt();
    let mut action = sec.start_action;
    if (x - sec.start).norm() > 1e-13 * sec.start.norm().max(1.0) {
        let arc = sector_arc(graph, k, x).ok_or(Error::BranchAmbiguous { at: x })?;
        let path = track_branch(q, &arc, s)?;
        for smp in &path.samples {
            r = sqrt_near(smp.sqrt_q, r);
        }
        s = path.end_sqrt_q();
        action += path.w_end();
    }
    let start = match sec.endpoint {
        Endpoint::Pole { z, .. } => pole_start_data(q, z, x, opts.series_terms)?,
        Endpoint::Infinity { .. } => infinity_start_data(q, x, s, opts.series_terms)?,
    };
    if (start.s - s).norm() > 1e-8 * s.norm() {
        return Err(Error::BranchAmbiguous { at: x });
    }
    Ok(SectorPoint { sector: k, start, r, action })
}

/// χ-factor `χ_{i→k}` with the logarithm of the Wronskian `W[Ψ_i, Ψ_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiFactor {
    pub from: usize,
    pub to: usize,
    pub chi: ChiValue,
    pub log_wronskian: Complex64,
}

/// Evaluates `χ_{i→k}` on a planned canonical path.
///
/// `Ψ_i` is integrated to the start arc of sector `k`, where it meets the
/// series data of `Ψ_k`. With `s_i = −s_k` there,
/// `χ_{i→k} = χ_i χ_k − ħ/(2s_i) (χ_i χ_k' − χ_i' χ_k)` is the limit of
/// `χ_i` at `z_k` (an exact consequence of the Wronskian being constant), and
/// `W[Ψ_i, Ψ_k] = −2 s_i/(ħ r_i r_k) e^{(W_i + W_k)/ħ} χ_{i→k}`.
pub fn chi_factor_on(graph: &StokesGraph, cp: &CanonicalPath, opts: &ChiOptions) -> Result<ChiFactor> {
    let q = &graph.q;
    let hb = q.hbar;
    let (i, k) = (cp.from, cp.to);
    let pi = sector_point(graph, i, cp.path.start(), opts)?;
    let pk = sector_point(graph, k, cp.path.end(), opts)?;
    let run = |o: &ChiOptions| -> Result<Complex64> {
        let st = integrate_chi(q, &cp.path.waypoints, &pi.start, o)?;
        let si = st.s;
        Ok(st.chi * pk.start.chi - hb / (2.0 * si) * (st.chi * pk.start.dchi - st.dchi * pk.start.chi))
    };
    let si = cp.path.end_sqrt_q();
    let mismatch = (si + pk.start.s).norm() / si.norm();
    if i != k && mismatch > 1e-6 {
        return Err(Error::NonCanonicalPath { violation: mismatch });
    }
    if i == k {
        let chi = ChiValue {
            value: Complex64::new(1.0, 0.0),
            sigma: graph.sectors[i].sigma,
            path: cp.path.clone(),
            error_estimate: 0.0,
            method: ChiMethod::Ode,
        };
        return Ok(ChiFactor { from: i, to: k, chi, log_wronskian: Complex64::new(f64::NEG_INFINITY, 0.0) });
    }
    let v1 = run(opts)?;
    let v2 = run(&ChiOptions { rtol: opts.rtol / 2.0, atol: opts.atol / 2.0, ..*opts })?;
    let mut ri = pi.r;
    for smp in &cp.path.samples {
        ri = sqrt_near(smp.sqrt_q, ri);
    }
    let ei = pi.action + cp.path.w_end();
    let log_wronskian = (-2.0 * si / (hb * ri * pk.r) * v2).ln() + (ei + pk.action) / hb;
    let chi = ChiValue {
        value: v2,
        sigma: graph.sectors[i].sigma,
        path: cp.path.clone(),
        error_estimate: 2.0 * (v1 - v2).norm() + (pi.start.truncation + pk.start.truncation) * v2.norm(),
        method: ChiMethod::Ode,
    };
    Ok(ChiFactor { from: i, to: k, chi, log_wronskian })
}

pub fn chi_factor(graph: &StokesGraph, from: usize, to: usize, opts: &ChiOptions) -> Result<ChiFactor> {
    let cp = crate::stokes::plan_canonical_path(graph, from, to)?;
    chi_factor_on(graph, &cp, opts)
}

/// `Ψ_k` and `Ψ_k'` at the end of `pts`, which must start on the start arc of sector `k`.
pub fn psi_at(graph: &StokesGraph, k: usize, pts: &[Complex64], opts: &ChiOptions) -> Result<(Complex64, Complex64)> {
    let q = &graph.q;
    let p = sector_point(graph, k, pts[0], opts)?;
    let st = integrate_chi(q, pts, &p.start, opts)?;
    let path = track_branch(q, pts, p.start.s)?;
    let mut r = p.r;
    for smp in &path.samples {
        r = sqrt_near(smp.sqrt_q, r);
    }
    let e = p.action + path.w_end();
    let x = *pts.last().unwrap();
    let d = q.derivs(x);
    let amp = (e / q.hbar).exp() / r;
    let psi = amp * st.chi;
    let dpsi = psi * (-d.d1 / (4.0 * d.q) + st.s / q.hbar) + amp * st.dchi;
    Ok((psi, dpsi))
}
