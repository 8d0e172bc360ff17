//! Brute-force reference solutions on the real axis.
//!
//! Nothing here touches the Stokes-graph machinery: the potential is only
//! sampled on a uniform real mesh and integrated with a Numerov recurrence.
//! Agreement with [`crate::connection`] is therefore independent evidence.

use twofloat::TwoFloat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::RationalPotential;

/// Required agreement between grid `n` and grid `2n`.
pub const GRID_DOUBLING_TOL: f64 = 1e-8;
/// Bound on `| |R|² + |T|² − 1 |` for a transmission result.
pub const UNITARITY_TOL: f64 = 1e-8;
const MIN_POINTS: usize = 1000;
/// Mesh size used by [`transmission`] and [`resonance_fit`] on `[−30, 30]`.
pub const DEFAULT_POINTS: usize = 48001;
/// Decay `∫ √(V − E)/ħ` the mesh must contain beyond the outermost turning points.
const MIN_FORBIDDEN_DEPTH: f64 = 20.0;

/// Uniform real-axis mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::GridTooCoarse(format!("{n} points, at least {MIN_POINTS} required")));
        }
        if !(x_max > x_min) {
            return Err(Error::GridTooCoarse(format!("empty interval [{x_min}, {x_max}]")));
        }
        Ok(Grid { x_min, x_max, n })
    }

    /// `[−30, 30]` with `n` points.
    pub fn symmetric(n: usize) -> Result<Self> {
        Grid::new(-30.0, 30.0, n)
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + self.step() * i as f64
    }

    fn doubled(&self) -> Grid {
        Grid { n: 2 * self.n - 1, ..*self }
    }
}

/// Boundary condition a [`GridSolution`] was built with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// `ψ = 0` at both ends (bound state).
    Dirichlet,
    /// Pure outgoing wave at `x_max`.
    Outgoing,
}

/// Wavefunction samples on a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub boundary: Boundary,
}

/// `V` on the real axis; the oracle never leaves it.
fn sampler(pot: &RationalPotential) -> Result<impl Fn(f64) -> f64 + '_> {
    if !pot.is_real() {
        return Err(Error::Unsupported("oracle needs a potential real on the real axis".into()));
    }
    Ok(move |x: f64| pot.eval(Complex64::new(x, 0.0)).re)
}

/// Numerov weights `1 − h² f/12` and `f` on the mesh, `f = (V − E)/ħ²`.
fn numerov_f(v: &impl Fn(f64) -> f64, grid: &Grid, e: f64, hbar: f64) -> Vec<f64> {
    (0..grid.n).map(|i| (v(grid.x(i)) - e) / (hbar * hbar)).collect()
}

/// Three-term Numerov recurrence from `start` towards `end` (either direction),
/// seeded with `ψ = 0`, `ψ = tiny`. Values are rescaled by positive factors
/// when large, so signs (and nodes) are preserved.
fn numerov_shoot(f: &[f64], h: f64, start: usize, end: usize) -> Vec<f64> {
    let n = f.len();
    let mut psi = vec![0.0; n];
    let w = |i: usize| 1.0 - h * h * f[i] / 12.0;
    let step: isize = if end >= start { 1 } else { -1 };
    let idx = |k: usize| (start as isize + step * k as isize) as usize;
    let len = (end as isize - start as isize).unsigned_abs() + 1;
    psi[idx(0)] = 0.0;
    psi[idx(1)] = 1e-30;
    for k in 2..len {
        let (a, b, c) = (idx(k - 2), idx(k - 1), idx(k));
        psi[c] = ((12.0 - 10.0 * w(b)) * psi[b] - w(a) * psi[a]) / w(c);
        if psi[c].abs() > 1e200 {
            for j in 0..=k {
                psi[idx(j)] *= 1e-200;
            }
        }
    }
    psi
}

fn sign_changes(psi: &[f64]) -> usize {
    let mut count = 0;
    let mut last = 0.0f64;
    for &p in psi {
        if p != 0.0 {
            if last != 0.0 && p.signum() != last.signum() {
                count += 1;
            }
            last = p;
        }
    }
    count
}

/// Number of discrete Dirichlet eigenvalues below `e` (Sturm count of the
/// left shot over the whole mesh).
fn count_below(v: &impl Fn(f64) -> f64, grid: &Grid, e: f64, hbar: f64) -> usize {
    let f = numerov_f(v, grid, e, hbar);
    let psi = numerov_shoot(&f, grid.step(), 0, grid.n - 1);
    sign_changes(&psi)
}

/// Index of the matching point: the outermost classical turning point on the right.
fn match_index(f: &[f64]) -> usize {
    let n = f.len();
    (1..n - 1).rev().find(|&i| f[i] < 0.0).unwrap_or(n / 2).clamp(2, n - 3)
}

/// Discrete Wronskian of the left and right shots at the matching point.
/// Both shots are scaled by positive factors only, so this is continuous in `E`
/// and vanishes exactly at an eigenvalue.
fn matching(v: &impl Fn(f64) -> f64, grid: &Grid, e: f64, hbar: f64, m: usize) -> f64 {
    let f = numerov_f(v, grid, e, hbar);
    let h = grid.step();
    let l = numerov_shoot(&f, h, 0, m + 1);
    let r = numerov_shoot(&f, h, grid.n - 1, m);
    let (nl, nr) = (l[m].abs().max(l[m + 1].abs()), r[m].abs().max(r[m + 1].abs()));
    (l[m + 1] * r[m] - l[m] * r[m + 1]) / (nl * nr)
}

/// Checks that the mesh extends deep enough into the forbidden regions at `e`.
fn check_depth(v: &impl Fn(f64) -> f64, grid: &Grid, e: f64, hbar: f64) -> Result<()> {
    let h = grid.step();
    let f: Vec<f64> = (0..grid.n).map(|i| v(grid.x(i)) - e).collect();
    let (Some(first), Some(last)) = (f.iter().position(|&y| y < 0.0), f.iter().rposition(|&y| y < 0.0)) else {
        return Ok(());
    };
    let depth = |r: std::ops::Range<usize>| r.map(|i| f[i].max(0.0).sqrt()).sum::<f64>() * h / hbar;
    let (dl, dr) = (depth(0..first), depth(last + 1..grid.n));
    if dl.min(dr) < MIN_FORBIDDEN_DEPTH {
        return Err(Error::GridTooCoarse(format!(
            "mesh [{}, {}] holds only {:.1} decay lengths beyond the turning points at E = {e}",
            grid.x_min,
            grid.x_max,
            dl.min(dr)
        )));
    }
    Ok(())
}

fn levels_on(v: &impl Fn(f64) -> f64, grid: &Grid, hbar: f64, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let n_lo = count_below(v, grid, lo, hbar);
    let n_hi = count_below(v, grid, hi, hbar);
    let mut out = Vec::new();
    for k in n_lo..n_hi {
        // Sturm bisection isolates level k
        let (mut a, mut b) = (lo, hi);
        while b - a > 1e-9 * (1.0 + a.abs()) {
            let c = 0.5 * (a + b);
            if count_below(v, grid, c, hbar) > k {
                b = c;
            } else {
                a = c;
            }
        }
        // log-derivative matching refines it
        let m = match_index(&numerov_f(v, grid, 0.5 * (a + b), hbar));
        let (mut fa, fb) = (matching(v, grid, a, hbar, m), matching(v, grid, b, hbar, m));
        if fa.signum() == fb.signum() {
            out.push(0.5 * (a + b));
            continue;
        }
        while b - a > 1e-13 * (1.0 + a.abs()) {
            let c = 0.5 * (a + b);
            let fc = matching(v, grid, c, hbar, m);
            if fc.signum() == fa.signum() {
                a = c;
                fa = fc;
            } else {
                b = c;
            }
        }
        out.push(0.5 * (a + b));
    }
    for &e in &out {
        check_depth(v, grid, e, hbar)?;
    }
    Ok(out)
}

/// Bound states in `window` on `[−30, 30]` with `n_grid` points.
pub fn numerov_bound_states(pot: &RationalPotential, hbar: f64, window: (f64, f64), n_grid: usize) -> Result<Vec<f64>> {
    numerov_bound_states_on(pot, hbar, window, Grid::symmetric(n_grid)?)
}

/// Bound states in `window`, certified by repeating on the doubled mesh.
/// Returns the fine-mesh energies.
pub fn numerov_bound_states_on(pot: &RationalPotential, hbar: f64, window: (f64, f64), grid: Grid) -> Result<Vec<f64>> {
    let v = sampler(pot)?;
    let v_inf = v(grid.x_min).min(v(grid.x_max));
    let (lo, hi) = (window.0, window.1.min(v_inf));
    if !(hi > lo) {
        return Ok(Vec::new());
    }
    let coarse = levels_on(&v, &grid, hbar, lo, hi)?;
    let fine = levels_on(&v, &grid.doubled(), hbar, lo, hi)?;
    if coarse.len() != fine.len() {
        return Err(Error::GridTooCoarse(format!("{} levels on n = {}, {} on 2n", coarse.len(), grid.n, fine.len())));
    }
    let shift = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if shift > GRID_DOUBLING_TOL {
        return Err(Error::GridTooCoarse(format!("levels move by {shift:.2e} when n = {} is doubled", grid.n)));
    }
    Ok(fine)
}

/// Normalised bound-state wavefunction at an energy returned by
/// [`numerov_bound_states_on`].
pub fn numerov_wavefunction(pot: &RationalPotential, hbar: f64, energy: f64, grid: Grid) -> Result<GridSolution> {
    let v = sampler(pot)?;
    let f = numerov_f(&v, &grid, energy, hbar);
    let h = grid.step();
    let m = match_index(&f);
    let l = numerov_shoot(&f, h, 0, m);
    let r = numerov_shoot(&f, h, grid.n - 1, m);
    let scale = l[m] / r[m];
    let mut psi: Vec<f64> = (0..grid.n).map(|i| if i <= m { l[i] } else { r[i] * scale }).collect();
    let norm = (psi.iter().map(|p| p * p).sum::<f64>() * h).sqrt();
    psi.iter_mut().for_each(|p| *p /= norm);
    Ok(GridSolution { grid, values: psi.into_iter().map(|p| Complex64::new(p, 0.0)).collect(), boundary: Boundary::Dirichlet })
}

/// Reflection and transmission amplitudes of the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub r: Complex64,
    pub t: Complex64,
    pub energy: f64,
    pub unitarity_defect: f64,
}

impl Transmission {
    pub fn t2(&self) -> f64 {
        self.t.norm_sqr()
    }
}

fn check_decay(v: &impl Fn(f64) -> f64) -> Result<()> {
    for s in [-1.0, 1.0] {
        // |x V(x)| must fall off
        let (a, b) = ((s * 1e3 * v(s * 1e3)).abs(), (s * 1e6 * v(s * 1e6)).abs());
        if !(b < 0.01 * a.max(1e-300)) && b > 1e-12 {
            return Err(Error::NonDecayingPotential);
        }
    }
    Ok(())
}

/// Local wavenumber including the next adiabatic correction,
/// `K² = k² + ¾(k'/k)² − ½ k''/k` with `k = √(E − V)/ħ`, so that
/// `K^{-1/2} e^{±i∫K}` solve the equation up to fourth order in the
/// slowness of `V`. Derivatives of `V` by central differences.
fn local_k(v: &impl Fn(f64) -> f64, x: f64, e: f64, hbar: f64) -> f64 {
    let d = 1e-3 * x.abs().max(1.0);
    let (vm, v0, vp) = (v(x - d), v(x), v(x + d));
    let (d1, d2) = ((vp - vm) / (2.0 * d), (vp - 2.0 * v0 + vm) / (d * d));
    let p = e - v0;
    let k2 = p / (hbar * hbar);
    let lk1 = -d1 / (2.0 * p);
    let lk2 = -d2 / (2.0 * p) - d1 * d1 / (4.0 * p * p);
    (k2 + 0.75 * lk1 * lk1 - 0.5 * lk2).sqrt()
}

/// Integrates from `x_max` (pure outgoing wave) back to `x_min` and splits
/// the result into incoming and reflected waves. Both ends use the local
/// (first-order WKB) plane waves, so a slowly decaying tail of `V` at the
/// mesh ends does not show up as spurious reflection.
pub fn transmission(pot: &RationalPotential, hbar: f64, energy: f64) -> Result<Transmission> {
    transmission_on(pot, hbar, energy, Grid::symmetric(DEFAULT_POINTS)?)
}

pub fn transmission_on(pot: &RationalPotential, hbar: f64, energy: f64, grid: Grid) -> Result<Transmission> {
    let v = sampler(pot)?;
    check_decay(&v)?;
    let v_inf = v(1e9).max(v(-1e9));
    if !(energy > v_inf) {
        return Err(Error::Unsupported(format!("transmission needs E > V(±∞) = {v_inf:.6e}")));
    }
    let tr = transmission_raw(&v, &grid, hbar, energy)?;
    if tr.unitarity_defect > UNITARITY_TOL {
        return Err(Error::GridTooCoarse(format!(
            "unitarity defect {:.2e} on n = {}",
            tr.unitarity_defect, grid.n
        )));
    }
    Ok(tr)
}

fn transmission_raw(v: &impl Fn(f64) -> f64, grid: &Grid, hbar: f64, e: f64) -> Result<Transmission> {
    let n = grid.n;
    let h = grid.step();
    let f = numerov_f(v, grid, e, hbar);
    if f.iter().any(|&y| y >= 0.0) && (f[0] >= 0.0 || f[n - 1] >= 0.0) {
        return Err(Error::Unsupported("mesh ends are classically forbidden".into()));
    }
    // K is only needed within a quarter wavelength of either end
    let k = |i: usize| local_k(v, grid.x(i), e, hbar);
    let span = |i: usize| ((std::f64::consts::FRAC_PI_2 / (k(i) * h)).round() as usize).clamp(1, n / 8);
    // ∫ k between mesh points, composite Simpson with a trapezoid remainder
    let phase = |a: usize, b: usize| -> f64 {
        let (lo, hi) = (a.min(b), a.max(b));
        let mut s = 0.0;
        let mut j = lo;
        while j + 2 <= hi {
            s += h / 3.0 * (k(j) + 4.0 * k(j + 1) + k(j + 2));
            j += 2;
        }
        if j < hi {
            s += 0.5 * h * (k(j) + k(j + 1));
        }
        if b >= a {
            s
        } else {
            -s
        }
    };
    let wave = |i: usize, theta: f64, sgn: f64| Complex64::from_polar(1.0 / k(i).sqrt(), sgn * theta);

    // seed: outgoing wave at the right end, θ measured from the last point
    let mut psi = vec![Complex64::new(0.0, 0.0); n];
    psi[n - 1] = wave(n - 1, 0.0, 1.0);
    psi[n - 2] = wave(n - 2, phase(n - 1, n - 2), 1.0);
    // Through two barriers the wave passes near-cancelling growing and
    // decaying parts; the recurrence runs in double-double so that roundoff
    // stays below the amplification `e^{2K/ħ}`.
    let w: Vec<TwoFloat> = f.iter().map(|&fi| TwoFloat::from(1.0) - TwoFloat::from(h * h) * fi / 12.0).collect();
    let mut re = vec![TwoFloat::from(0.0); n];
    let mut im = vec![TwoFloat::from(0.0); n];
    for j in [n - 1, n - 2] {
        re[j] = TwoFloat::from(psi[j].re);
        im[j] = TwoFloat::from(psi[j].im);
    }
    for i in (0..n - 2).rev() {
        let c = TwoFloat::from(12.0) - w[i + 1] * 10.0;
        re[i] = (c * re[i + 1] - w[i + 2] * re[i + 2]) / w[i];
        im[i] = (c * im[i + 1] - w[i + 2] * im[i + 2]) / w[i];
    }
    for i in 0..n {
        psi[i] = Complex64::new(re[i].hi() + re[i].lo(), im[i].hi() + im[i].lo());
    }
    // decompose at the left end on points 0 and s0
    let s0 = span(0);
    let th = phase(0, s0);
    let m = DMatrix::from_row_slice(2, 2, &[wave(0, 0.0, 1.0), wave(0, 0.0, -1.0), wave(s0, th, 1.0), wave(s0, th, -1.0)]);
    let rhs = DVector::from_vec(vec![psi[0], psi[s0]]);
    let ab = m.lu().solve(&rhs).ok_or_else(|| Error::GridTooCoarse("singular decomposition".into()))?;
    let (a, b) = (ab[0], ab[1]);
    let (r, t) = (b / a, 1.0 / a);
    Ok(Transmission { r, t, energy: e, unitarity_defect: (r.norm_sqr() + t.norm_sqr() - 1.0).abs() })
}

/// Breit–Wigner fit of a transmission peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFit {
    pub e0: f64,
    pub gamma: f64,
    /// Fitted `|T|²` at `E₀`.
    pub peak: f64,
    /// RMS relative deviation of the fit over the sampled points.
    pub residual: f64,
}

/// Locates the highest `|T(E)|²` peak in `window` and fits
/// `P (Γ²/4) / ((E − E₀)² + Γ²/4)` on the points above a tenth of the peak.
pub fn resonance_fit(pot: &RationalPotential, hbar: f64, window: (f64, f64)) -> Result<ResonanceFit> {
    resonance_fit_on(pot, hbar, window, Grid::symmetric(DEFAULT_POINTS)?)
}

pub fn resonance_fit_on(pot: &RationalPotential, hbar: f64, window: (f64, f64), grid: Grid) -> Result<ResonanceFit> {
    let (lo, hi) = window;
    let no_peak = || Error::NoPeakFound { lo, hi };
    let t2 = |e: f64| transmission_on(pot, hbar, e, grid).map(|t| t.t2());
    let m = 200;
    let es: Vec<f64> = (0..=m).map(|j| lo + (hi - lo) * j as f64 / m as f64).collect();
    let ys: Vec<f64> = es.iter().map(|&e| t2(e)).collect::<Result<_>>()?;
    // interior local maxima of the scan, highest first
    let mut cands: Vec<usize> = (1..m).filter(|&j| ys[j] >= ys[j - 1] && ys[j] >= ys[j + 1]).collect();
    cands.sort_by(|&a, &b| ys[b].partial_cmp(&ys[a]).unwrap());
    let j = *cands.first().ok_or_else(no_peak)?;

    // golden section between the neighbours (|T|² is unimodal there)
    let (mut a, mut b) = (es[j - 1], es[j + 1]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (t2(c)?, t2(d)?);
    while b - a > 1e-15 * (1.0 + a.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = t2(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = t2(d)?;
        }
    }
    let e_pk = 0.5 * (a + b);
    let y_pk = t2(e_pk)?;
    // a peak must stand out of its surroundings by more than a decade
    if !(y_pk > 10.0 * ys[j - 1].max(ys[j + 1]).min(ys[0].max(ys[m]))) {
        return Err(no_peak());
    }

    // half-maximum on either side fixes the sampling scale
    let half = |mut inner: f64, mut outer: f64| -> Result<f64> {
        for _ in 0..200 {
            let mid = 0.5 * (inner + outer);
            if t2(mid)? > 0.5 * y_pk {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        Ok(0.5 * (inner + outer))
    };
    let hl = e_pk - half(e_pk, es[j - 1])?;
    let hr = half(e_pk, es[j + 1])? - e_pk;
    let w = 0.5 * (hl + hr);
    if !(w > 0.0) {
        return Err(no_peak());
    }

    // top decade: |u| ≤ 3 half-widths, where a Lorentzian stays above P/10
    let pts: Vec<(f64, f64)> = (-30..=30)
        .map(|i| {
            let u = 0.1 * i as f64;
            t2(e_pk + u * w).map(|y| (u, y))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&(_, y)| y >= 0.1 * y_pk)
        .collect();
    // 1/y = c0 + c1 u + c2 u², weighted by y so each point counts relatively
    let rows = pts.len();
    let mut am = DMatrix::zeros(rows, 3);
    let mut bv = DVector::zeros(rows);
    for (r, &(u, y)) in pts.iter().enumerate() {
        am[(r, 0)] = y;
        am[(r, 1)] = y * u;
        am[(r, 2)] = y * u * u;
        bv[r] = 1.0;
    }
    let c = am.svd(true, true).solve(&bv, 1e-14).map_err(|_| no_peak())?;
    if !(c[2] > 0.0) {
        return Err(no_peak());
    }
    let u0 = -c[1] / (2.0 * c[2]);
    let inv_p = c[0] - c[1] * c[1] / (4.0 * c[2]);
    let peak = 1.0 / inv_p;
    let g2 = inv_p / c[2];
    let e0 = e_pk + u0 * w;
    let gamma = 2.0 * g2.sqrt() * w;
    let residual = (pts
        .iter()
        .map(|&(u, y)| {
            let model = peak * g2 / ((u - u0).powi(2) + g2);
            ((model - y) / y).powi(2)
        })
        .sum::<f64>()
        / rows as f64)
        .sqrt();
    Ok(ResonanceFit { e0, gamma, peak, residual })
}

/// `|T(E)|²` and `arg T` on a list of energies.
pub fn transmission_scan(pot: &RationalPotential, hbar: f64, energies: &[f64]) -> Result<Vec<Transmission>> {
    energies.iter().map(|&e| transmission(pot, hbar, e)).collect()
}

/// CSV with header `E,T2,phase`.
pub fn scan_to_csv(scan: &[Transmission]) -> String {
    let mut s = String::from("E,T2,phase\n");
    for t in scan {
        s.push_str(&format!("{:.15e},{:.15e},{:.15e}\n", t.energy, t.t2(), t.t.arg()));
    }
    s
}

/// `E_n = −α²/(4ħ²n²)` for `n = l+1 ..= n_max`.
pub fn coulomb_exact_levels(alpha: f64, l: u32, hbar: f64, n_max: u32) -> Vec<f64> {
    (l + 1..=n_max).map(|n| -alpha * alpha / (4.0 * hbar * hbar * (n * n) as f64)).collect()
}
