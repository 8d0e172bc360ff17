//! Stokes graphs: turning points, Stokes lines, sectors with their σ signs,
//! and canonical paths between sectors.
//!
//! Canonical paths are planned on the anti-Stokes skeleton (lines of constant
//! `Im W` leaving the turning points). Along such a line `Re W` is monotone,
//! and at a simple turning point the two lines other than the arrival line
//! both continue the ascent, so any non-backtracking walk through the skeleton
//! joined by short arcs around the turning points is canonical. Direct
//! gradient flows between two singular endpoints ("fans") are used when no
//! skeleton walk exists.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contour::{sqrt_near, track_branch, ContourPath, EndpointKind};
use crate::error::{Error, Result};
use crate::potential::{cmp_complex, EffectiveQ};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphOptions {
    /// Minimal distance kept from poles and turning points.
    pub clearance: f64,
    /// Largest start radius around a pole.
    pub pole_radius: f64,
    /// Smallest start radius toward infinity.
    pub infinity_radius: f64,
    /// Base step of the line tracer, relative to `max(1, |x|)`.
    pub step: f64,
    /// Radius of the arcs joining skeleton edges at a turning point.
    pub hop_radius: f64,
    /// Gradient flows launched per sector when looking for fans.
    pub fan_count: usize,
    pub max_steps: usize,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            clearance: 1e-3,
            pole_radius: 0.3,
            infinity_radius: 20.0,
            step: 0.02,
            hop_radius: 0.15,
            fan_count: 24,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Terminal {
    Pole(Complex64),
    /// Left the tracing disc; `direction` is the final argument of `x`.
    Infinity { direction: f64 },
    TurningPoint(Complex64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesLine {
    pub origin: Complex64,
    pub points: Vec<Complex64>,
    pub terminal: Terminal,
    /// Largest `|Re W| / max(1, |Im W|)` seen along the line.
    pub max_re_w: f64,
}

/// An anti-Stokes line from a turning point, one edge of the planning skeleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonEdge {
    pub origin: Complex64,
    pub points: Vec<Complex64>,
    pub terminal: Terminal,
    /// Sector whose endpoint the edge reaches, if it reaches one.
    pub sector: Option<usize>,
    /// False when the edge touches a branch cut.
    pub usable: bool,
}

/// A branch cut: the ray `origin + t·direction`, `t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub origin: Complex64,
    pub direction: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Endpoint {
    Pole { z: Complex64, order: usize },
    /// Angular window `(lo, hi)` of the circle at infinity, `hi > lo`.
    Infinity { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SectorLabel {
    One,
    OneBar,
    Two,
    TwoBar,
    Three,
    ThreeBar,
    Other(usize),
}

impl fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SectorLabel::One => write!(f, "1"),
            SectorLabel::OneBar => write!(f, "1b"),
            SectorLabel::Two => write!(f, "2"),
            SectorLabel::TwoBar => write!(f, "2b"),
            SectorLabel::Three => write!(f, "3"),
            SectorLabel::ThreeBar => write!(f, "3b"),
            SectorLabel::Other(k) => write!(f, "x{k}"),
        }
    }
}

impl std::str::FromStr for SectorLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "1" => SectorLabel::One,
            "1b" => SectorLabel::OneBar,
            "2" => SectorLabel::Two,
            "2b" => SectorLabel::TwoBar,
            "3" => SectorLabel::Three,
            "3b" => SectorLabel::ThreeBar,
            other => match other.strip_prefix('x').and_then(|k| k.parse().ok()) {
                Some(k) => SectorLabel::Other(k),
                None => return Err(Error::Unsupported(format!("unknown sector label {other}"))),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub id: usize,
    pub label: SectorLabel,
    pub endpoint: Endpoint,
    /// Sign making `σ Re W → −∞` toward the endpoint, for `W` measured from
    /// the reference turning point with the principal root at the first step
    /// of the anchor.
    pub sigma: i8,
    pub representative: Complex64,
    /// Turning point `W` is measured from.
    pub reference_tp: Option<Complex64>,
    /// Skeleton edge from the reference turning point into this sector.
    pub anchor: Option<usize>,
    /// Where fundamental-solution start data are evaluated.
    pub start: Complex64,
    /// Distance of `start` from the pole, or `|start|` for infinity.
    pub start_radius: f64,
    /// Recessive branch of `sqrt(q̃)` at `start`.
    pub recessive_sqrt: Complex64,
    /// `W` on the recessive branch from the reference turning point to `start`.
    pub start_action: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanFlow {
    pub from: usize,
    pub to: usize,
    pub points: Vec<Complex64>,
    /// Smallest distance to a turning point along the flow.
    pub clearance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesGraph {
    pub q: EffectiveQ,
    pub options: GraphOptions,
    pub turning_points: Vec<Complex64>,
    pub poles: Vec<Complex64>,
    pub cuts: Vec<Cut>,
    pub lines: Vec<StokesLine>,
    pub edges: Vec<SkeletonEdge>,
    pub sectors: Vec<Sector>,
    pub fans: Vec<FanFlow>,
    /// Unordered pairs of sectors joined by a canonical path.
    pub communication: Vec<(usize, usize)>,
    stokes_dirs: Vec<f64>,
    trace_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RouteKind {
    Trivial,
    /// Walk through the listed turning points.
    Skeleton(Vec<Complex64>),
    Fan,
}

/// A canonical path between two sectors together with its audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalPath {
    pub from: usize,
    pub to: usize,
    pub kind: RouteKind,
    /// Tracked on the recessive branch of `from`, starting at its start radius.
    pub path: ContourPath,
    /// Largest relative decrease of `σ Re W` between consecutive samples.
    pub violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutePreference {
    SkeletonFirst,
    FanFirst,
    SkeletonOnly,
    FanOnly,
}

fn wrap(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

/// Angular position of `a` inside the window starting at `lo`, in `[0, 2π)`.
fn rel_angle(a: f64, lo: f64) -> f64 {
    wrap(a - lo)
}

fn segment_hits_ray(a: Complex64, b: Complex64, cut: &Cut) -> bool {
    // solve a + t (b - a) = z + u d with t in [0,1], u >= 0
    let d = cut.direction;
    let e = b - a;
    let den = e.re * (-d.im) - e.im * (-d.re);
    if den.abs() < 1e-300 {
        return false;
    }
    let r = cut.origin - a;
    let t = (r.re * (-d.im) - r.im * (-d.re)) / den;
    let u = (e.re * r.im - e.im * r.re) / den;
    (0.0..=1.0).contains(&t) && u >= 0.0
}

fn polyline_hits_cut(pts: &[Complex64], cuts: &[Cut]) -> bool {
    pts.windows(2).any(|w| cuts.iter().any(|c| segment_hits_ray(w[0], w[1], c)))
}

struct Trace {
    points: Vec<Complex64>,
    terminal: Option<Terminal>,
    max_re_w: f64,
    min_tp_dist: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Flow {
    /// Keep `Re W` fixed.
    Stokes,
    /// Follow the gradient of `Re W` (keeps `Im W` fixed).
    Gradient,
}

impl StokesGraph {
    fn singular_distance(&self, x: Complex64, skip: Option<Complex64>) -> f64 {
        let mut d = f64::INFINITY;
        for &t in &self.turning_points {
            if skip.map_or(false, |s| (s - t).norm() < 1e-12) {
                continue;
            }
            d = d.min((x - t).norm());
        }
        for &p in &self.poles {
            d = d.min((x - p).norm());
        }
        d
    }

    #[allow(clippy::too_many_arguments)]
    fn trace(
        &self,
        start: Complex64,
        s0: Complex64,
        w0: Complex64,
        flow: Flow,
        sign: f64,
        origin_tp: Option<Complex64>,
        stop_radius: f64,
    ) -> Trace {
        let q = &self.q;
        let opts = &self.options;
        let target = match flow {
            Flow::Stokes => w0.re,
            Flow::Gradient => w0.im,
        };
        let dir = |s: Complex64| -> Complex64 {
            let g = s.conj() / s.norm();
            match flow {
                Flow::Stokes => I * g * sign,
                Flow::Gradient => g * sign,
            }
        };
        let mut x = start;
        let mut s = s0;
        let mut w = w0;
        let mut points = Vec::with_capacity(512);
        if let Some(t) = origin_tp {
            points.push(t);
        }
        points.push(x);
        let mut max_re_w: f64 = 0.0;
        let mut min_tp_dist = f64::INFINITY;
        let mut travelled = 0.0;
        let eps_tp = (2.0 * opts.clearance).max(2e-3);
        let eps_pole = (10.0 * opts.clearance).max(5e-3);
        for _ in 0..opts.max_steps {
            let d_sing = self.singular_distance(x, if travelled < 0.1 { origin_tp } else { None });
            let h = (opts.step * x.norm().max(1.0)).min(0.25 * d_sing).max(1e-6);
            let d1 = dir(s);
            let xm = x + d1 * (0.5 * h);
            let sm = sqrt_near(q.qt(xm), s);
            let dm = dir(sm);
            let mut xn = x + dm * h;
            let mut sn = sqrt_near(q.qt(xn), sm);
            w += sm * (xn - x);
            // project back onto the level set
            match flow {
                Flow::Stokes => {
                    let r = w.re - target;
                    max_re_w = max_re_w.max(r.abs() / w.im.abs().max(1.0));
                    xn -= sn.conj() / sn.norm_sqr() * r;
                    w -= r;
                }
                Flow::Gradient => {
                    let r = w.im - target;
                    xn -= I * sn.conj() / sn.norm_sqr() * r;
                    w -= I * r;
                }
            }
            sn = sqrt_near(q.qt(xn), sn);
            travelled += (xn - x).norm();
            x = xn;
            s = sn;
            points.push(x);
            for &t in &self.turning_points {
                let is_origin = origin_tp.map_or(false, |o| (o - t).norm() < 1e-12);
                let dist = (x - t).norm();
                if !is_origin {
                    min_tp_dist = min_tp_dist.min(dist);
                }
                if dist < eps_tp && (!is_origin || travelled > 0.5) {
                    points.push(t);
                    return Trace { points, terminal: Some(Terminal::TurningPoint(t)), max_re_w, min_tp_dist };
                }
            }
            for &p in &self.poles {
                if (x - p).norm() < eps_pole {
                    return Trace { points, terminal: Some(Terminal::Pole(p)), max_re_w, min_tp_dist };
                }
            }
            if x.norm() > stop_radius {
                return Trace {
                    points,
                    terminal: Some(Terminal::Infinity { direction: wrap(x.arg()) }),
                    max_re_w,
                    min_tp_dist,
                };
            }
        }
        Trace { points, terminal: None, max_re_w, min_tp_dist }
    }

    /// Sector owning a far point or a pole terminal.
    fn sector_of_terminal(&self, terminal: &Terminal, last: Complex64) -> Option<usize> {
        match terminal {
            Terminal::Pole(p) => self.sectors.iter().position(|s| match s.endpoint {
                Endpoint::Pole { z, .. } => (z - p).norm() < 1e-9 * (1.0 + p.norm()),
                _ => false,
            }),
            Terminal::Infinity { .. } => self.sector_at_infinity(last),
            Terminal::TurningPoint(_) => None,
        }
    }

    /// Infinity sector containing the far point `p`.
    pub fn sector_at_infinity(&self, p: Complex64) -> Option<usize> {
        let th = wrap(p.arg());
        let n = self.stokes_dirs.len();
        if n == 0 {
            return None;
        }
        // Stokes window containing th
        let mut win = None;
        for k in 0..n {
            let lo = self.stokes_dirs[k];
            let hi = if k + 1 < n { self.stokes_dirs[k + 1] } else { self.stokes_dirs[0] + TAU };
            if rel_angle(th, lo) < hi - lo {
                win = Some((lo, hi));
            }
        }
        let (lo, hi) = win?;
        // cuts splitting the window, ordered by angle
        let mut cuts: Vec<(f64, Cut)> = self
            .cuts
            .iter()
            .filter_map(|c| {
                let a = rel_angle(c.direction.arg(), lo);
                (a > 1e-9 && a < hi - lo - 1e-9).then_some((a, *c))
            })
            .collect();
        cuts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut bounds = vec![lo];
        bounds.extend(cuts.iter().map(|(a, _)| lo + a));
        bounds.push(hi);
        let idx = cuts
            .iter()
            .filter(|(_, c)| (c.direction.conj() * (p - c.origin)).im > 0.0)
            .count();
        let (slo, shi) = (bounds[idx], bounds[idx + 1]);
        self.sectors.iter().position(|s| match s.endpoint {
            Endpoint::Infinity { lo, hi } => (wrap(lo) - wrap(slo)).abs() < 1e-9 && ((hi - lo) - (shi - slo)).abs() < 1e-9,
            _ => false,
        })
    }

    pub fn sector_by_label(&self, label: SectorLabel) -> Option<usize> {
        self.sectors.iter().position(|s| s.label == label)
    }

    pub fn communicates(&self, a: usize, b: usize) -> bool {
        a == b || self.communication.iter().any(|&(x, y)| (x, y) == (a.min(b), a.max(b)))
    }
}

/// Cut directions used when none are given: away from the origin, or along
/// the negative real axis for a pole at the origin.
pub fn default_cuts(poles: &[Complex64]) -> Vec<Cut> {
    poles
        .iter()
        .map(|&z| {
            let direction = if z.norm() < 1e-12 { Complex64::new(-1.0, 0.0) } else { z / z.norm() };
            Cut { origin: z, direction }
        })
        .collect()
}

pub fn trace_graph(q: &EffectiveQ) -> Result<StokesGraph> {
    trace_graph_with(q, GraphOptions::default(), None)
}

pub fn trace_graph_with(q: &EffectiveQ, options: GraphOptions, cuts: Option<Vec<Cut>>) -> Result<StokesGraph> {
    let tps = q.find_turning_points()?;
    if let Some(t) = tps.iter().find(|t| t.multiplicity > 1) {
        return Err(Error::NonGenericGraph(format!("multiple turning point at {}", t.location)));
    }
    let turning_points: Vec<Complex64> = tps.iter().map(|t| t.location).collect();
    for (i, a) in turning_points.iter().enumerate() {
        for b in &turning_points[i + 1..] {
            if (a - b).norm() < 10.0 * options.clearance {
                return Err(Error::NonGenericGraph(format!("turning points {a} and {b} nearly collide")));
            }
        }
    }
    let sing = q.classify_singularities();
    // endpoints: poles of order >= 2 (W diverges there)
    let poles: Vec<Complex64> = q.poles().iter().map(|p| p.location).collect();
    let endpoint_poles: Vec<(Complex64, usize)> =
        sing.entries.iter().filter(|s| s.order >= 2).map(|s| (s.location, s.order)).collect();
    let cuts = cuts.unwrap_or_else(|| default_cuts(&endpoint_poles.iter().map(|p| p.0).collect::<Vec<_>>()));

    // asymptotic Stokes directions at infinity: Re(sqrt(c) x^{(m+2)/2}) = 0
    let mut stokes_dirs = Vec::new();
    if sing.infinity.w_divergent {
        let m = sing.infinity.order as f64;
        let a = sing.infinity.leading.sqrt().arg();
        let n = (sing.infinity.order + 2) as usize;
        for j in 0..n {
            stokes_dirs.push(wrap((PI / 2.0 + j as f64 * PI - a) * 2.0 / (m + 2.0)));
        }
        stokes_dirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }

    let mut graph = StokesGraph {
        q: q.clone(),
        options,
        turning_points: turning_points.clone(),
        poles,
        cuts,
        lines: Vec::new(),
        edges: Vec::new(),
        sectors: Vec::new(),
        fans: Vec::new(),
        communication: Vec::new(),
        stokes_dirs,
        trace_radius: 0.0,
    };

    // sectors: poles first, then windows at infinity
    let mut sectors = Vec::new();
    for &(z, order) in &endpoint_poles {
        sectors.push(Sector {
            id: 0,
            label: SectorLabel::Other(0),
            endpoint: Endpoint::Pole { z, order },
            sigma: 1,
            representative: z,
            reference_tp: None,
            anchor: None,
            start: z,
            start_radius: 0.0,
            recessive_sqrt: Complex64::new(0.0, 0.0),
            start_action: Complex64::new(0.0, 0.0),
        });
    }
    let n = graph.stokes_dirs.len();
    for k in 0..n {
        let lo = graph.stokes_dirs[k];
        let hi = if k + 1 < n { graph.stokes_dirs[k + 1] } else { graph.stokes_dirs[0] + TAU };
        let mut inner: Vec<f64> = graph
            .cuts
            .iter()
            .map(|c| rel_angle(c.direction.arg(), lo))
            .filter(|&a| a > 1e-9 && a < hi - lo - 1e-9)
            .collect();
        inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut bounds = vec![lo];
        bounds.extend(inner.iter().map(|a| lo + a));
        bounds.push(hi);
        for w in bounds.windows(2) {
            sectors.push(Sector {
                id: 0,
                label: SectorLabel::Other(0),
                endpoint: Endpoint::Infinity { lo: w[0], hi: w[1] },
                sigma: 1,
                representative: Complex64::new(0.0, 0.0),
                reference_tp: None,
                anchor: None,
                start: Complex64::new(0.0, 0.0),
                start_radius: 0.0,
                recessive_sqrt: Complex64::new(0.0, 0.0),
                start_action: Complex64::new(0.0, 0.0),
            });
        }
    }
    for (i, s) in sectors.iter_mut().enumerate() {
        s.id = i;
    }

    // start radii
    let mut r_inf = options.infinity_radius;
    if sing.infinity.order == 0 {
        let y0 = sing.infinity.leading.sqrt().norm();
        if y0 > 0.0 {
            r_inf = r_inf.max(18.0 * q.hbar / y0);
        }
    }
    let far = graph.poles.iter().chain(&turning_points).map(|p| p.norm()).fold(0.0, f64::max);
    r_inf = r_inf.max(4.0 * far);
    graph.trace_radius = 1.5 * r_inf;
    for s in sectors.iter_mut() {
        match s.endpoint {
            Endpoint::Pole { z, .. } => {
                let mut d = f64::INFINITY;
                for &t in &turning_points {
                    d = d.min((t - z).norm());
                }
                for &p in &graph.poles {
                    if (p - z).norm() > 1e-12 {
                        d = d.min((p - z).norm());
                    }
                }
                s.start_radius = options.pole_radius.min(0.45 * d);
                let away = graph
                    .cuts
                    .iter()
                    .find(|c| (c.origin - z).norm() < 1e-12)
                    .map(|c| -c.direction)
                    .unwrap_or(Complex64::new(1.0, 0.0));
                s.representative = z + away * s.start_radius;
                s.start = s.representative;
            }
            Endpoint::Infinity { lo, hi } => {
                s.start_radius = r_inf;
                s.representative = Complex64::from_polar(r_inf, 0.5 * (lo + hi));
                s.start = s.representative;
            }
        }
    }
    graph.sectors = sectors;
    label_sectors(&mut graph.sectors);

    // Stokes lines and skeleton edges from every turning point
    for &t in &turning_points {
        let d = q.derivs(t).d1;
        let c = d.sqrt();
        let a = c.arg();
        let launch = 0.02_f64.min(0.2 * graph.singular_distance(t, Some(t)));
        for m in 0..3 {
            // Stokes directions: arg c + 1.5 φ = π/2 + mπ
            let phi = (PI / 2.0 + m as f64 * PI - a) / 1.5;
            let u = Complex64::from_polar(launch, phi);
            let s0 = c * u.sqrt();
            let s0 = sqrt_near(q.qt(t + u), s0);
            let w0 = 2.0 / 3.0 * c * u * u.sqrt();
            let g = I * s0.conj();
            let sign = if (g * u.conj()).re > 0.0 { 1.0 } else { -1.0 };
            let tr = graph.trace(t + u, s0, Complex64::new(0.0, w0.im), Flow::Stokes, sign, Some(t), graph.trace_radius);
            let terminal = tr.terminal.ok_or(Error::TracingStalled { at: *tr.points.last().unwrap() })?;
            graph.lines.push(StokesLine { origin: t, points: tr.points, terminal, max_re_w: tr.max_re_w });
        }
        for m in 0..3 {
            let phi = (m as f64 * PI - a) / 1.5;
            let u = Complex64::from_polar(launch, phi);
            let s0 = sqrt_near(q.qt(t + u), c * u.sqrt());
            let w0 = 2.0 / 3.0 * c * u * u.sqrt();
            let sign = if (s0.conj() * u.conj()).re > 0.0 { 1.0 } else { -1.0 };
            let tr = graph.trace(t + u, s0, Complex64::new(w0.re, 0.0), Flow::Gradient, sign, Some(t), graph.trace_radius);
            let terminal = tr.terminal.ok_or(Error::TracingStalled { at: *tr.points.last().unwrap() })?;
            let last = *tr.points.last().unwrap();
            let sector = graph.sector_of_terminal(&terminal, last);
            // the part inside the start radius must stay off the cuts
            let usable = !polyline_hits_cut(&tr.points, &graph.cuts);
            graph.edges.push(SkeletonEdge { origin: t, points: tr.points, terminal, sector, usable });
        }
    }

    choose_anchors(&mut graph)?;
    trace_fans(&mut graph);
    let ns = graph.sectors.len();
    for a in 0..ns {
        for b in a + 1..ns {
            if skeleton_walk(&graph, a, b).is_some() || graph.fans.iter().any(|f| (f.from, f.to) == (a, b) || (f.from, f.to) == (b, a)) {
                graph.communication.push((a, b));
            }
        }
    }
    Ok(graph)
}

fn label_sectors(sectors: &mut [Sector]) {
    let tol = 1e-9;
    for s in sectors.iter_mut() {
        s.label = match s.endpoint {
            Endpoint::Pole { z, .. } => {
                if z.im < -tol {
                    SectorLabel::ThreeBar
                } else {
                    SectorLabel::Three
                }
            }
            Endpoint::Infinity { lo, hi } => {
                let mid = 0.5 * (lo + hi);
                let (c, sn) = (mid.cos(), mid.sin());
                let lower = sn < -tol;
                if c < -1e-6 {
                    if lower {
                        SectorLabel::TwoBar
                    } else {
                        SectorLabel::Two
                    }
                } else if lower {
                    SectorLabel::OneBar
                } else {
                    SectorLabel::One
                }
            }
        };
    }
    // duplicates fall back to generic labels
    let labels: Vec<SectorLabel> = sectors.iter().map(|s| s.label).collect();
    for s in sectors.iter_mut() {
        if labels.iter().filter(|&&l| l == s.label).count() > 1 {
            s.label = SectorLabel::Other(s.id);
        }
    }
}

/// Point where a polyline leaving `center` first reaches `radius` (searching
/// from the far end), with the polyline truncated there. `outward` selects
/// truncation for infinity (|x| measured from 0) versus a pole.
fn truncate_at_radius(pts: &[Complex64], center: Complex64, radius: f64) -> Option<Vec<Complex64>> {
    // pts runs from a turning point toward `center` (pole) or outward (infinity)
    let inside = |x: Complex64| (x - center).norm() <= radius;
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if inside(a) != inside(b) {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                if inside(a + (b - a) * m) == inside(a) {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            out.push(a + (b - a) * lo);
            return Some(out);
        }
        out.push(b);
    }
    None
}

impl StokesGraph {
    /// Edge polyline from its turning point up to the start radius of its sector.
    pub fn edge_to_start(&self, e: usize) -> Option<Vec<Complex64>> {
        let edge = &self.edges[e];
        let sec = &self.sectors[edge.sector?];
        match sec.endpoint {
            Endpoint::Pole { z, .. } => truncate_at_radius(&edge.points, z, sec.start_radius),
            Endpoint::Infinity { .. } => {
                // leave the disc of radius R
                let pts = &edge.points;
                let mut out = vec![pts[0]];
                for w in pts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if a.norm() <= sec.start_radius && b.norm() > sec.start_radius {
                        let (mut lo, mut hi) = (0.0, 1.0);
                        for _ in 0..60 {
                            let m = 0.5 * (lo + hi);
                            if (a + (b - a) * m).norm() <= sec.start_radius {
                                lo = m;
                            } else {
                                hi = m;
                            }
                        }
                        out.push(a + (b - a) * lo);
                        return Some(out);
                    }
                    out.push(b);
                }
                None
            }
        }
    }
}

fn choose_anchors(graph: &mut StokesGraph) -> Result<()> {
    let q = graph.q.clone();
    for k in 0..graph.sectors.len() {
        let mut best: Option<(usize, f64)> = None;
        for (e, edge) in graph.edges.iter().enumerate() {
            if edge.sector != Some(k) || !edge.usable {
                continue;
            }
            let Some(pts) = graph.edge_to_start(e) else { continue };
            let len: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
            let better = match best {
                None => true,
                Some((b, blen)) => {
                    let other = graph.edges[b].origin;
                    if (len - blen).abs() > 1e-6 * blen.max(1.0) {
                        len < blen
                    } else {
                        // prefer the turning point with the larger real, then imaginary, part
                        cmp_complex(edge.origin, other) == std::cmp::Ordering::Greater
                    }
                }
            };
            if better {
                best = Some((e, len));
            }
        }
        let Some((e, _)) = best else { continue };
        let pts = graph.edge_to_start(e).unwrap();
        let t = graph.edges[e].origin;
        let start = *pts.last().unwrap();
        // principal root at the first step of the anchor fixes the reported σ
        let seed = q.qt(pts[1]).sqrt();
        let path = track_branch(&q, &pts, seed)?;
        let w = path.w_end();
        let sigma: i8 = if w.re > 0.0 { -1 } else { 1 };
        let sec = &mut graph.sectors[k];
        sec.anchor = Some(e);
        sec.reference_tp = Some(t);
        sec.start = start;
        sec.representative = start;
        sec.sigma = sigma;
        sec.recessive_sqrt = path.end_sqrt_q() * sigma as f64;
        sec.start_action = w * sigma as f64;
    }
    // sectors without an anchor still need a recessive branch at their start
    for k in 0..graph.sectors.len() {
        if graph.sectors[k].anchor.is_some() {
            continue;
        }
        let sec = &graph.sectors[k];
        let x = sec.start;
        let s = q.qt(x).sqrt();
        let outward = match sec.endpoint {
            Endpoint::Pole { z, .. } => z - x,
            Endpoint::Infinity { .. } => x,
        };
        // recessive: Re W decreases toward the endpoint
        let rec = if (s * outward).re < 0.0 { s } else { -s };
        graph.sectors[k].recessive_sqrt = rec;
        graph.sectors[k].sigma = 1;
    }
    Ok(())
}

impl StokesGraph {
    /// The same graph carried to a nearby, possibly complex, energy.
    ///
    /// Lines, sectors and routes keep their geometry; turning points follow
    /// by continuity and every sector's recessive branch and start action are
    /// recomputed. Valid while the turning points move much less than the hop
    /// radius, which is the regime of exponentially narrow resonances.
    pub fn at_energy(&self, energy: Complex64) -> Result<StokesGraph> {
        let q = self.q.with_energy(energy)?;
        let new_tps: Vec<Complex64> = q.find_turning_points()?.iter().map(|t| t.location).collect();
        if new_tps.len() != self.turning_points.len() {
            return Err(Error::NonGenericGraph("turning points changed in number".into()));
        }
        let limit = 0.1 * self.options.hop_radius;
        let mut moved = Vec::with_capacity(new_tps.len());
        for &t in &self.turning_points {
            let (d, n) = new_tps
                .iter()
                .map(|&n| ((n - t).norm(), n))
                .fold((f64::INFINITY, t), |a, b| if b.0 < a.0 { b } else { a });
            if d > limit {
                return Err(Error::NonGenericGraph(format!("turning point {t} moved by {d:.2e}; energy step too large")));
            }
            moved.push(n);
        }
        let follow = |t: Complex64| -> Complex64 {
            self.turning_points.iter().zip(&moved).find(|(o, _)| (*o - t).norm() < 1e-9 * (1.0 + t.norm())).map(|(_, n)| *n).unwrap_or(t)
        };
        let mut g = self.clone();
        g.q = q.clone();
        for k in 0..g.sectors.len() {
            let old = &self.sectors[k];
            match old.anchor {
                Some(e) => {
                    let mut pts = self.edge_to_start(e).ok_or(Error::BranchAmbiguous { at: old.start })?;
                    let seed_old = self.q.qt(pts[1]).sqrt();
                    pts[0] = follow(pts[0]);
                    let seed = sqrt_near(q.qt(pts[1]), seed_old);
                    let path = track_branch(&q, &pts, seed)?;
                    let sec = &mut g.sectors[k];
                    sec.reference_tp = Some(pts[0]);
                    sec.recessive_sqrt = path.end_sqrt_q() * sec.sigma as f64;
                    sec.start_action = path.w_end() * sec.sigma as f64;
                }
                None => {
                    g.sectors[k].recessive_sqrt = sqrt_near(q.qt(old.start), old.recessive_sqrt);
                }
            }
        }
        Ok(g)
    }
}

fn trace_fans(graph: &mut StokesGraph) {
    let n = graph.sectors.len();
    let mut fans = Vec::new();
    for k in 0..n {
        let sec = graph.sectors[k].clone();
        let launch: Vec<Complex64> = match sec.endpoint {
            Endpoint::Pole { z, .. } => {
                let m = graph.options.fan_count * 2;
                (0..m)
                    .map(|j| z + Complex64::from_polar(sec.start_radius, TAU * (j as f64 + 0.5) / m as f64))
                    .collect()
            }
            Endpoint::Infinity { lo, hi } => {
                let m = graph.options.fan_count;
                (1..m)
                    .map(|j| lo + (hi - lo) * j as f64 / m as f64)
                    .map(|a| Complex64::from_polar(sec.start_radius, a))
                    // points near a cut belong to a neighbouring window
                    .filter(|&p| graph.sector_at_infinity(p) == Some(k))
                    .collect()
            }
        };
        for x0 in launch {
            // recessive branch at x0: continue from the sector start along the arc
            let Some(s0) = arc_branch(graph, k, x0) else { continue };
            // ascend σ Re W: gradient of Re W for the recessive branch
            let tr = graph.trace(x0, s0, Complex64::new(0.0, 0.0), Flow::Gradient, 1.0, None, graph.trace_radius);
            let Some(term) = tr.terminal else { continue };
            if matches!(term, Terminal::TurningPoint(_)) {
                continue;
            }
            let last = *tr.points.last().unwrap();
            let Some(to) = graph.sector_of_terminal(&term, last) else { continue };
            if to == k {
                continue;
            }
            // truncate at the target start radius
            let dest = &graph.sectors[to];
            let pts = match dest.endpoint {
                Endpoint::Pole { z, .. } => truncate_at_radius(&tr.points, z, dest.start_radius),
                Endpoint::Infinity { .. } => {
                    let i = tr.points.iter().skip(1).position(|p| p.norm() > dest.start_radius).map(|i| i + 1);
                    i.map(|i| {
                        let mut v = tr.points[..i].to_vec();
                        let (a, b) = (tr.points[i - 1], tr.points[i]);
                        let (mut lo, mut hi) = (0.0, 1.0);
                        for _ in 0..60 {
                            let m = 0.5 * (lo + hi);
                            if (a + (b - a) * m).norm() <= dest.start_radius {
                                lo = m;
                            } else {
                                hi = m;
                            }
                        }
                        v.push(a + (b - a) * lo);
                        v
                    })
                }
            };
            let Some(pts) = pts else { continue };
            if pts.len() < 2 || polyline_hits_cut(&pts, &graph.cuts) {
                continue;
            }
            fans.push(FanFlow { from: k, to, points: pts, clearance: tr.min_tp_dist });
        }
    }
    graph.fans = fans;
}

/// Arc from the sector start to `x` at the same radius, not crossing a cut.
pub(crate) fn sector_arc(graph: &StokesGraph, k: usize, x: Complex64) -> Option<Vec<Complex64>> {
    let sec = &graph.sectors[k];
    let (center, radius) = match sec.endpoint {
        Endpoint::Pole { z, .. } => (z, sec.start_radius),
        Endpoint::Infinity { .. } => (Complex64::new(0.0, 0.0), sec.start_radius),
    };
    let a1 = (sec.start - center).arg();
    let a2 = (x - center).arg();
    let short = (a2 - a1 + PI).rem_euclid(TAU) - PI;
    for da in [short, if short > 0.0 { short - TAU } else { short + TAU }] {
        let n = ((da.abs() * radius / 0.02).ceil() as usize).clamp(8, 20000);
        let pts: Vec<Complex64> = (0..=n)
            .map(|j| center + Complex64::from_polar(radius, a1 + da * j as f64 / n as f64))
            .collect();
        if !polyline_hits_cut(&pts, &graph.cuts) {
            return Some(pts);
        }
    }
    None
}

pub(crate) fn arc_branch(graph: &StokesGraph, k: usize, x: Complex64) -> Option<Complex64> {
    let sec = &graph.sectors[k];
    let arc = sector_arc(graph, k, x)?;
    let mut s = sec.recessive_sqrt;
    for p in arc.iter().skip(1) {
        s = sqrt_near(graph.q.qt(*p), s);
    }
    Some(s)
}

/// Non-backtracking walk of skeleton edges from sector `a` to sector `b`:
/// (first edge, [(tp, next edge)]..).
fn skeleton_walk(graph: &StokesGraph, a: usize, b: usize) -> Option<Vec<usize>> {
    // states: (edge index, turning point we are at after traversing it)
    let ne = graph.edges.len();
    let same = |x: Complex64, y: Complex64| (x - y).norm() < 1e-9 * (1.0 + x.norm());
    let mut prev: Vec<Option<(usize, Complex64)>> = vec![None; 2 * ne];
    let mut seen = vec![false; 2 * ne];
    let mut queue = VecDeque::new();
    // a state is (edge, end) where end = 0 means we arrived at edge.origin, 1 at the other TP
    let key = |e: usize, at_origin: bool| 2 * e + usize::from(!at_origin);
    for (e, edge) in graph.edges.iter().enumerate() {
        if edge.usable && edge.sector == Some(a) && graph.edge_to_start(e).is_some() {
            seen[key(e, true)] = true;
            queue.push_back((e, true));
        }
    }
    while let Some((e, at_origin)) = queue.pop_front() {
        let edge = &graph.edges[e];
        let here = if at_origin {
            edge.origin
        } else {
            match edge.terminal {
                Terminal::TurningPoint(t) => t,
                _ => continue,
            }
        };
        for (f, next) in graph.edges.iter().enumerate() {
            if f == e || !next.usable {
                continue;
            }
            // the same saddle connection traced from the other end is the same edge
            if let (Terminal::TurningPoint(t1), Terminal::TurningPoint(t2)) = (edge.terminal, next.terminal) {
                if same(edge.origin, t2) && same(next.origin, t1) {
                    continue;
                }
            }
            let leaves_here = same(next.origin, here);
            let arrives_here = matches!(next.terminal, Terminal::TurningPoint(t) if same(t, here));
            if leaves_here && next.sector == Some(b) && graph.edge_to_start(f).is_some() {
                // reconstruct
                let mut chain = vec![f, e];
                let mut cur = (e, at_origin);
                while let Some(p) = prev[key(cur.0, cur.1)] {
                    let (pe, _) = p;
                    let pat = prev_at_origin(graph, pe, cur.0, cur.1);
                    chain.push(pe);
                    cur = (pe, pat);
                }
                chain.reverse();
                return Some(chain);
            }
            // continue along a saddle connection
            let state = if leaves_here && matches!(next.terminal, Terminal::TurningPoint(_)) {
                Some((f, false))
            } else if arrives_here {
                Some((f, true))
            } else {
                None
            };
            if let Some((f, at_o)) = state {
                if !seen[key(f, at_o)] {
                    seen[key(f, at_o)] = true;
                    prev[key(f, at_o)] = Some((e, here));
                    queue.push_back((f, at_o));
                }
            }
        }
    }
    None
}

/// Which end of edge `pe` we stood at before moving onto edge `e`.
fn prev_at_origin(graph: &StokesGraph, pe: usize, e: usize, e_at_origin: bool) -> bool {
    let same = |x: Complex64, y: Complex64| (x - y).norm() < 1e-9 * (1.0 + x.norm());
    let edge = &graph.edges[e];
    // the turning point where we entered edge e
    let entry = if e_at_origin {
        match edge.terminal {
            Terminal::TurningPoint(t) => t,
            _ => edge.origin,
        }
    } else {
        edge.origin
    };
    same(graph.edges[pe].origin, entry)
}

/// Replace the corner at `t` between an arriving and a leaving polyline by a
/// short arc of radius `rho`.
fn hop(pin: &[Complex64], t: Complex64, pout: &[Complex64], rho: f64) -> Vec<Complex64> {
    let i = pin.iter().rposition(|p| (p - t).norm() >= rho).unwrap_or(0);
    let j = pout.iter().position(|p| (p - t).norm() >= rho).unwrap_or(pout.len() - 1);
    let a1 = (pin[i] - t).arg();
    let a2 = (pout[j] - t).arg();
    let da = (a2 - a1 + PI).rem_euclid(TAU) - PI;
    let mut out = pin[..=i].to_vec();
    let n = 24;
    for k in 1..n {
        out.push(t + Complex64::from_polar(rho, a1 + da * k as f64 / n as f64));
    }
    out.extend_from_slice(&pout[j..]);
    out
}

impl StokesGraph {
    fn oriented_edge(&self, e: usize, from_tp: Complex64) -> Vec<Complex64> {
        let edge = &self.edges[e];
        if (edge.origin - from_tp).norm() < 1e-9 * (1.0 + from_tp.norm()) {
            edge.points.clone()
        } else {
            edge.points.iter().rev().copied().collect()
        }
    }

    fn skeleton_polyline(&self, chain: &[usize]) -> Option<(Vec<Complex64>, Vec<Complex64>)> {
        let first = self.edge_to_start(chain[0])?;
        let mut poly: Vec<Complex64> = first.iter().rev().copied().collect();
        let mut at = self.edges[chain[0]].origin;
        let mut tps = vec![at];
        for (idx, &e) in chain.iter().enumerate().skip(1) {
            let last = idx + 1 == chain.len();
            let seg = if last { self.edge_to_start(e)? } else { self.oriented_edge(e, at) };
            poly = hop(&poly, at, &seg, self.options.hop_radius.min(0.3 * self.singular_distance(at, Some(at))));
            if !last {
                at = *seg.last().unwrap();
                tps.push(at);
            }
        }
        Some((poly, tps))
    }

    fn route_polyline(&self, from: usize, to: usize, pref: RoutePreference) -> Option<(Vec<Complex64>, RouteKind)> {
        let skeleton = || {
            skeleton_walk(self, from, to).and_then(|chain| {
                let (poly, tps) = self.skeleton_polyline(&chain)?;
                (!polyline_hits_cut(&poly, &self.cuts)).then_some((poly, RouteKind::Skeleton(tps)))
            })
        };
        let fan = || {
            let direct = self
                .fans
                .iter()
                .filter(|f| f.from == from && f.to == to)
                .max_by(|a, b| a.clearance.partial_cmp(&b.clearance).unwrap())
                .map(|f| f.points.clone());
            let reverse = || {
                self.fans
                    .iter()
                    .filter(|f| f.from == to && f.to == from)
                    .max_by(|a, b| a.clearance.partial_cmp(&b.clearance).unwrap())
                    .map(|f| f.points.iter().rev().copied().collect())
            };
            direct.or_else(reverse).map(|p| (p, RouteKind::Fan))
        };
        match pref {
            RoutePreference::SkeletonFirst => skeleton().or_else(fan),
            RoutePreference::FanFirst => fan().or_else(skeleton),
            RoutePreference::SkeletonOnly => skeleton(),
            RoutePreference::FanOnly => fan(),
        }
    }
}

pub fn plan_canonical_path(graph: &StokesGraph, from: usize, to: usize) -> Result<CanonicalPath> {
    plan_canonical_path_with(graph, from, to, RoutePreference::SkeletonFirst)
}

pub fn plan_canonical_path_with(graph: &StokesGraph, from: usize, to: usize, pref: RoutePreference) -> Result<CanonicalPath> {
    let n = graph.sectors.len();
    let name = |k: usize| if k < n { graph.sectors[k].label.to_string() } else { format!("#{k}") };
    if from >= n || to >= n {
        return Err(Error::CanonicalPathNotFound { from: name(from), to: name(to) });
    }
    let sec = &graph.sectors[from];
    if from == to {
        let path = track_branch(&graph.q, &[sec.start, sec.start], sec.recessive_sqrt)?;
        return Ok(CanonicalPath { from, to, kind: RouteKind::Trivial, path, violation: 0.0 });
    }
    let (poly, kind) = graph
        .route_polyline(from, to, pref)
        .ok_or_else(|| Error::CanonicalPathNotFound { from: name(from), to: name(to) })?;
    let s0 = arc_branch(graph, from, poly[0]).ok_or_else(|| Error::CanonicalPathNotFound { from: name(from), to: name(to) })?;
    let kind_of = |k: usize| match graph.sectors[k].endpoint {
        Endpoint::Pole { .. } => EndpointKind::Pole,
        Endpoint::Infinity { .. } => EndpointKind::Infinity { radius: graph.sectors[k].start_radius },
    };
    let path = track_branch(&graph.q, &poly, s0)?.with_kinds(kind_of(from), kind_of(to));
    let violation = audit_monotonicity(&path);
    if violation > 1e-9 {
        return Err(Error::NonCanonicalPath { violation });
    }
    Ok(CanonicalPath { from, to, kind, path, violation })
}

/// Largest decrease of `Re W` between consecutive samples, relative to the
/// local `|W|` scale. The path is tracked on the branch that is recessive at
/// its start, so `Re W` must not decrease.
pub fn audit_monotonicity(path: &ContourPath) -> f64 {
    let mut worst: f64 = 0.0;
    for w in path.samples.windows(2) {
        let d = w[1].w.re - w[0].w.re;
        let scale = w[0].w.norm().max(w[1].w.norm()).max(1.0);
        worst = worst.max(-d / scale);
    }
    worst
}

impl StokesGraph {
    /// CSV of all traced polylines: `kind,index,origin_re,origin_im,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,index,origin_re,origin_im,re,im\n");
        for (k, l) in self.lines.iter().enumerate() {
            for p in &l.points {
                out.push_str(&format!("stokes,{k},{:.14e},{:.14e},{:.14e},{:.14e}\n", l.origin.re, l.origin.im, p.re, p.im));
            }
        }
        for (k, e) in self.edges.iter().enumerate() {
            for p in &e.points {
                out.push_str(&format!("anti,{k},{:.14e},{:.14e},{:.14e},{:.14e}\n", e.origin.re, e.origin.im, p.re, p.im));
            }
        }
        out
    }

    /// SVG picture of the window `[-half, half]²`.
    pub fn to_svg(&self, half: f64) -> String {
        let size = 640.0;
        let sx = |x: Complex64| (x.re + half) / (2.0 * half) * size;
        let sy = |x: Complex64| (half - x.im) / (2.0 * half) * size;
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        );
        let path_d = |pts: &[Complex64]| {
            let mut d = String::new();
            for (i, p) in pts.iter().enumerate() {
                let p = Complex64::new(p.re.clamp(-4.0 * half, 4.0 * half), p.im.clamp(-4.0 * half, 4.0 * half));
                d.push_str(&format!("{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(p), sy(p)));
            }
            d
        };
        let mut lines: Vec<&StokesLine> = self.lines.iter().collect();
        lines.sort_by(|a, b| cmp_complex(a.origin, b.origin));
        for l in lines {
            out.push_str(&format!("<path d=\"{}\" stroke=\"black\" fill=\"none\" stroke-width=\"1.5\"/>\n", path_d(&l.points)));
        }
        let mut edges: Vec<&SkeletonEdge> = self.edges.iter().collect();
        edges.sort_by(|a, b| cmp_complex(a.origin, b.origin));
        for e in edges {
            out.push_str(&format!(
                "<path d=\"{}\" stroke=\"steelblue\" fill=\"none\" stroke-dasharray=\"5,4\"/>\n",
                path_d(&e.points)
            ));
        }
        for c in &self.cuts {
            let far = c.origin + c.direction * (8.0 * half);
            out.push_str(&format!(
                "<path d=\"{}\" stroke=\"gray\" fill=\"none\" stroke-width=\"3\" opacity=\"0.4\"/>\n",
                path_d(&[c.origin, far])
            ));
        }
        for &t in &self.turning_points {
            out.push_str(&format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"red\"/>\n", sx(t), sy(t)));
        }
        for &p in &self.poles {
            let (x, y) = (sx(p), sy(p));
            out.push_str(&format!(
                "<path d=\"M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}\" stroke=\"darkred\" stroke-width=\"2\"/>\n",
                x - 5.0,
                y - 5.0,
                x + 5.0,
                y + 5.0,
                x - 5.0,
                y + 5.0,
                x + 5.0,
                y - 5.0
            ));
        }
        for s in &self.sectors {
            let anchor = match s.endpoint {
                Endpoint::Pole { z, .. } => z + (s.representative - z) * 1.5,
                Endpoint::Infinity { lo, hi } => Complex64::from_polar(0.8 * half, 0.5 * (lo + hi)),
            };
            let sign = if s.sigma > 0 { "+" } else { "-" };
            out.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" fill=\"darkgreen\">S{} ({sign})</text>\n",
                sx(anchor),
                sy(anchor),
                s.label
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}
