//! Complex paths with a continuously tracked branch of `sqrt(q̃)`, action
//! integrals along them, and closed loops.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::EffectiveQ;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default distance kept from poles and turning points.
pub const DEFAULT_CLEARANCE: f64 = 1e-3;
/// Default truncation radius for paths running to infinity.
pub const DEFAULT_INFINITY_RADIUS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EndpointKind {
    TurningPoint,
    Pole,
    Infinity { radius: f64 },
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub x: Complex64,
    /// `sqrt(q̃)` on the tracked branch.
    pub sqrt_q: Complex64,
    /// Action accumulated from the first sample.
    pub w: Complex64,
}

/// A polyline together with a refined discretization carrying one analytic
/// branch of `sqrt(q̃)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourPath {
    pub waypoints: Vec<Complex64>,
    pub samples: Vec<PathSample>,
    pub start_kind: EndpointKind,
    pub end_kind: EndpointKind,
}

#[derive(Debug, Clone, Copy)]
pub struct TrackOptions {
    /// Largest step taken in one go, relative to `max(1, |x|)`.
    pub max_step: f64,
    /// Maximal number of halvings of a step.
    pub max_depth: u32,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions { max_step: 0.05, max_depth: 40 }
    }
}

/// The square root of `v` closest to `reference`.
pub fn sqrt_near(v: Complex64, reference: Complex64) -> Complex64 {
    let r = v.sqrt();
    if (r - reference).norm_sqr() <= (r + reference).norm_sqr() {
        r
    } else {
        -r
    }
}

fn is_turning_point(q: &EffectiveQ, x: Complex64) -> bool {
    let v = q.qt(x).norm();
    let scale = 1.0 + q.q(x).norm() + q.energy.norm();
    v <= 1e-9 * scale
}

/// Track the branch of `sqrt(q̃)` agreeing with `seed` at the first waypoint.
///
/// When the first waypoint is a turning point the seed only fixes the
/// direction: the branch at the first interior sample is the root closest
/// to `seed` in phase.
pub fn track_branch(q: &EffectiveQ, waypoints: &[Complex64], seed: Complex64) -> Result<ContourPath> {
    track_branch_with(q, waypoints, seed, TrackOptions::default())
}

pub fn track_branch_with(
    q: &EffectiveQ,
    waypoints: &[Complex64],
    seed: Complex64,
    opts: TrackOptions,
) -> Result<ContourPath> {
    let first = *waypoints
        .first()
        .ok_or_else(|| Error::InvalidLoop("empty waypoint list".into()))?;
    let tp_start = is_turning_point(q, first);
    let tp_end = waypoints.len() > 1 && is_turning_point(q, *waypoints.last().unwrap());
    let q0 = q.qt(first);
    if !tp_start && (seed * seed - q0).norm() > 1e-10 * q0.norm().max(1e-300) {
        return Err(Error::BranchAmbiguous { at: first });
    }
    let start_value = if tp_start { ZERO } else { seed };
    let mut samples = vec![PathSample { x: first, sqrt_q: start_value, w: ZERO }];
    let mut direction_seed = if tp_start { Some(seed) } else { None };
    let nseg = waypoints.len().saturating_sub(1);
    for (iseg, pair) in waypoints.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let len = (b - a).norm();
        if len == 0.0 {
            continue;
        }
        let mut t = 0.0;
        let last_seg = iseg + 1 == nseg;
        while t < 1.0 {
            let here = samples.last().unwrap().x;
            let hmax = opts.max_step * here.norm().max(1.0) / len;
            let mut h = hmax.min(1.0 - t);
            let mut depth = 0;
            loop {
                let xn = a + (b - a) * (t + h);
                let s_prev = samples.last().unwrap().sqrt_q;
                let reaches_tp_end = last_seg && tp_end && t + h >= 1.0;
                let accepted = if let Some(dir) = direction_seed {
                    // leaving a turning point: pick by phase
                    let r = q.qt(xn).sqrt();
                    let cand = if (r * dir.conj()).re >= 0.0 { r } else { -r };
                    let xm = a + (b - a) * (t + 0.5 * h);
                    let rm = sqrt_near(q.qt(xm), cand);
                    if (cand - rm).norm() < 0.75 * rm.norm() && !reaches_tp_end {
                        Some(cand)
                    } else {
                        None
                    }
                } else if reaches_tp_end {
                    // the final sample sits on a turning point; check the midpoint only
                    let xm = a + (b - a) * (t + 0.5 * h);
                    let rm = sqrt_near(q.qt(xm), s_prev);
                    if (rm - s_prev).norm() < 0.75 * s_prev.norm() {
                        Some(ZERO)
                    } else {
                        None
                    }
                } else {
                    let r = sqrt_near(q.qt(xn), s_prev);
                    let xm = a + (b - a) * (t + 0.5 * h);
                    let rm = sqrt_near(q.qt(xm), s_prev);
                    let ok = (r - s_prev).norm() < 0.5 * s_prev.norm()
                        && (rm - s_prev).norm() < 0.5 * s_prev.norm()
                        && (r - rm).norm() < 0.5 * rm.norm();
                    if ok {
                        Some(r)
                    } else {
                        None
                    }
                };
                if let Some(r) = accepted {
                    let prev = *samples.last().unwrap();
                    let (dw, _) = step_integral(q, prev.x, xn, prev.sqrt_q, r, 1e-13)?;
                    samples.push(PathSample { x: xn, sqrt_q: r, w: prev.w + dw });
                    direction_seed = None;
                    t += h;
                    if 1.0 - t < 1e-14 {
                        t = 1.0;
                    }
                    break;
                }
                h *= 0.5;
                depth += 1;
                if depth > opts.max_depth {
                    return Err(Error::BranchAmbiguous { at: a + (b - a) * t });
                }
            }
        }
    }
    let kind = |tp: bool| if tp { EndpointKind::TurningPoint } else { EndpointKind::Interior };
    Ok(ContourPath {
        waypoints: waypoints.to_vec(),
        samples,
        start_kind: kind(tp_start),
        end_kind: kind(tp_end),
    })
}

impl ContourPath {
    pub fn start(&self) -> Complex64 {
        self.samples[0].x
    }

    pub fn end(&self) -> Complex64 {
        self.samples.last().unwrap().x
    }

    pub fn end_sqrt_q(&self) -> Complex64 {
        self.samples.last().unwrap().sqrt_q
    }

    /// Accumulated action at the last sample (low-order estimate; see
    /// [`action_integral`] for the error-controlled value).
    pub fn w_end(&self) -> Complex64 {
        self.samples.last().unwrap().w
    }

    pub fn with_kinds(mut self, start: EndpointKind, end: EndpointKind) -> Self {
        self.start_kind = start;
        self.end_kind = end;
        self
    }

    /// The same path traversed backwards, on the same branch.
    pub fn reversed(&self) -> ContourPath {
        let w_end = self.w_end();
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|s| PathSample { x: s.x, sqrt_q: s.sqrt_q, w: s.w - w_end })
            .collect();
        ContourPath {
            waypoints: self.waypoints.iter().rev().copied().collect(),
            samples,
            start_kind: self.end_kind,
            end_kind: self.start_kind,
        }
    }

    pub fn length(&self) -> f64 {
        self.samples.windows(2).map(|p| (p[1].x - p[0].x).norm()).sum()
    }

    /// CSV with columns `re,im,sqrt_re,sqrt_im,w_re,w_im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,sqrt_re,sqrt_im,w_re,w_im\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e}\n",
                s.x.re, s.x.im, s.sqrt_q.re, s.sqrt_q.im, s.w.re, s.w.im
            ));
        }
        out
    }
}

// 7-point Gauss / 15-point Kronrod on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss–Kronrod panel of `f` over `[0, 1]`: (K15 value, |K15 − G7|).
pub fn gk15<F: FnMut(f64) -> Complex64>(f: F) -> (Complex64, f64) {
    let (k, e, _) = gk15_abs(f);
    (k, e)
}

/// As `gk15`, also returning the K15 estimate of `∫|f|`.
fn gk15_abs<F: FnMut(f64) -> Complex64>(mut f: F) -> (Complex64, f64, f64) {
    let fc = f(0.5);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut a = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = 0.5 * XGK[j];
        let f1 = f(0.5 - dx);
        let f2 = f(0.5 + dx);
        k += (f1 + f2) * WGK[j];
        a += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            g += (f1 + f2) * WG[j / 2];
        }
    }
    (k * 0.5, ((k - g) * 0.5).norm(), a * 0.5)
}

/// Adaptive Gauss–Kronrod quadrature of a smooth complex function on `[0, 1]`.
pub fn adaptive_gk<F: FnMut(f64) -> Complex64>(f: &mut F, tol: f64, max_depth: u32) -> Result<(Complex64, f64)> {
    fn rec<F: FnMut(f64) -> Complex64>(
        f: &mut F,
        a: f64,
        b: f64,
        tol: f64,
        depth: u32,
        max_depth: u32,
    ) -> Result<(Complex64, f64)> {
        let (v, e, mag) = gk15_abs(|t| f(a + (b - a) * t) * (b - a));
        // an error at rounding level of the panel cannot be reduced
        if e <= tol || e <= 64.0 * f64::EPSILON * mag || (b - a) < 1e-15 {
            return Ok((v, e));
        }
        if depth >= max_depth {
            return Err(Error::QuadratureNotConverged(format!("error {e:e} above {tol:e}")));
        }
        let m = 0.5 * (a + b);
        let (v1, e1) = rec(f, a, m, 0.5 * tol, depth + 1, max_depth)?;
        let (v2, e2) = rec(f, m, b, 0.5 * tol, depth + 1, max_depth)?;
        Ok((v1 + v2, e1 + e2))
    }
    rec(f, 0.0, 1.0, tol, 0, max_depth)
}

/// `∫ sqrt(q̃)` over the segment `[a, b]` whose end values are `sa`, `sb`
/// on one branch. A zero end value marks a turning point, handled with the
/// substitution `x = x₀ + (b − a) τ²`.
pub(crate) fn step_integral(
    q: &EffectiveQ,
    a: Complex64,
    b: Complex64,
    sa: Complex64,
    sb: Complex64,
    tol: f64,
) -> Result<(Complex64, f64)> {
    let l = b - a;
    if l.norm() == 0.0 {
        return Ok((ZERO, 0.0));
    }
    let tp_a = sa == ZERO;
    let tp_b = sb == ZERO;
    match (tp_a, tp_b) {
        (false, false) => {
            let mut f = |t: f64| {
                let guess = sa + (sb - sa) * t;
                sqrt_near(q.qt(a + l * t), guess) * l
            };
            adaptive_gk(&mut f, tol, 30)
        }
        (true, false) => {
            let mut f = |tau: f64| {
                let guess = sb * tau;
                sqrt_near(q.qt(a + l * tau * tau), guess) * l * (2.0 * tau)
            };
            adaptive_gk(&mut f, tol, 30)
        }
        (false, true) => {
            let mut f = |tau: f64| {
                let guess = sa * tau;
                sqrt_near(q.qt(b - l * tau * tau), guess) * l * (2.0 * tau)
            };
            adaptive_gk(&mut f, tol, 30)
        }
        (true, true) => {
            // both ends turning points: split at the midpoint
            let m = a + l * 0.5;
            let sm = q.qt(m).sqrt();
            let (v1, e1) = step_integral(q, a, m, ZERO, sm, 0.5 * tol)?;
            let (v2, e2) = step_integral(q, m, b, sm, ZERO, 0.5 * tol)?;
            Ok((v1 + v2, e1 + e2))
        }
    }
}

/// Action `W = ∫ sqrt(q̃) dx` along a tracked path, with absolute error
/// estimate.
pub fn action_integral(q: &EffectiveQ, path: &ContourPath) -> Result<(Complex64, f64)> {
    let total_len = path.length();
    if total_len == 0.0 {
        return Ok((ZERO, 0.0));
    }
    let mut sum = ZERO;
    let mut err = 0.0;
    for pair in path.samples.windows(2) {
        let (p0, p1) = (pair[0], pair[1]);
        let seg = (p1.x - p0.x).norm();
        let tol = (1e-11 * seg / total_len).max(1e-15);
        let (v, e) = step_integral(q, p0.x, p1.x, p0.sqrt_q, p1.sqrt_q, tol)?;
        sum += v;
        err += e;
    }
    if err > 1e-10 {
        return Err(Error::QuadratureNotConverged(format!("accumulated error {err:e}")));
    }
    Ok((sum, err))
}

/// A closed path with its orientation and the singular points it encloses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopContour {
    pub points: Vec<Complex64>,
    pub orientation: i32,
    pub enclosed: Vec<Complex64>,
}

/// Winding number of the closed polyline `pts` around `p`.
pub fn winding_number(pts: &[Complex64], p: Complex64) -> i32 {
    let n = pts.len();
    let mut total = 0.0;
    for k in 0..n {
        let a = pts[k] - p;
        let b = pts[(k + 1) % n] - p;
        total += (b / a).arg();
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i32
}

fn distance_to_polyline(pts: &[Complex64], p: Complex64) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|k| {
            let a = pts[k];
            let b = pts[(k + 1) % n];
            let d = b - a;
            let t = if d.norm_sqr() == 0.0 { 0.0 } else { ((p - a) * d.conj()).re / d.norm_sqr() };
            (a + d * t.clamp(0.0, 1.0) - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

impl LoopContour {
    /// Validate a closed polyline against the singular points of `q`.
    pub fn new(q: &EffectiveQ, points: Vec<Complex64>, orientation: i32, enclosed: Vec<Complex64>) -> Result<Self> {
        if orientation != 1 && orientation != -1 {
            return Err(Error::InvalidLoop(format!("orientation must be +-1, got {orientation}")));
        }
        if points.len() < 3 {
            return Err(Error::InvalidLoop("fewer than three vertices".into()));
        }
        let mut singular: Vec<Complex64> = q.poles().iter().map(|p| p.location).collect();
        singular.extend(q.find_turning_points()?.iter().map(|t| t.location));
        for &p in &enclosed {
            if winding_number(&points, p) != orientation {
                return Err(Error::InvalidLoop(format!("declared point {p} not enclosed with orientation {orientation}")));
            }
        }
        for &p in &singular {
            if distance_to_polyline(&points, p) < DEFAULT_CLEARANCE {
                return Err(Error::InvalidLoop(format!("contour passes within clearance of {p}")));
            }
            let declared = enclosed.iter().any(|e| (e - p).norm() < 1e-8 * (1.0 + p.norm()));
            if !declared && winding_number(&points, p) != 0 {
                return Err(Error::InvalidLoop(format!("undeclared singular point {p} is enclosed")));
            }
        }
        Ok(LoopContour { points, orientation, enclosed })
    }

    /// Circle of radius `radius` around `center`.
    pub fn circle(q: &EffectiveQ, center: Complex64, radius: f64, orientation: i32, enclosed: Vec<Complex64>) -> Result<Self> {
        let n = 128;
        let pts = (0..n)
            .map(|k| {
                let th = orientation as f64 * 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                center + Complex64::from_polar(radius, th)
            })
            .collect();
        Self::new(q, pts, orientation, enclosed)
    }

    /// Stadium-shaped loop around the segment `[a, b]` at distance `radius`.
    /// Encloses every singular point of `q` inside it.
    pub fn capsule(q: &EffectiveQ, a: Complex64, b: Complex64, radius: f64, orientation: i32) -> Result<Self> {
        let d = b - a;
        if d.norm() == 0.0 {
            return Err(Error::InvalidLoop("degenerate capsule".into()));
        }
        let u = d / d.norm();
        let nu = Complex64::new(0.0, 1.0) * u;
        let m = 48;
        let mut pts = Vec::with_capacity(4 * m);
        // lower side a -> b, cap around b, upper side b -> a, cap around a
        for k in 0..m {
            let t = k as f64 / m as f64;
            pts.push(a + d * t - nu * radius);
        }
        for k in 0..m {
            let th = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / m as f64;
            pts.push(b + u * Complex64::from_polar(radius, th));
        }
        for k in 0..m {
            let t = k as f64 / m as f64;
            pts.push(b - d * t + nu * radius);
        }
        for k in 0..m {
            let th = std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / m as f64;
            pts.push(a + u * Complex64::from_polar(radius, th));
        }
        if orientation == -1 {
            pts.reverse();
        }
        let mut singular: Vec<Complex64> = q.poles().iter().map(|p| p.location).collect();
        singular.extend(q.find_turning_points()?.iter().map(|t| t.location));
        let enclosed = singular.into_iter().filter(|&p| winding_number(&pts, p) != 0).collect();
        Self::new(q, pts, orientation, enclosed)
    }
}

/// `∮ sqrt(q̃) dx` with the principal branch at the first vertex.
pub fn loop_integral(q: &EffectiveQ, lp: &LoopContour) -> Result<Complex64> {
    let start = lp.points[0];
    let mut pts = lp.points.clone();
    pts.push(start);
    let seed = q.qt(start).sqrt();
    let path = track_branch(q, &pts, seed)?;
    let s_end = path.end_sqrt_q();
    if (s_end - seed).norm() > 1e-8 * seed.norm() {
        return Err(Error::BranchNotClosed);
    }
    Ok(action_integral(q, &path)?.0)
}
