//! Rational potentials, their singularities, and the Langer-corrected `q̃`.

mod poly;

pub use poly::{cluster_roots, Poly};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Pole clusters closer than this (relative) are one multiple pole.
const POLE_CLUSTER_TOL: f64 = 1e-6;
/// Turning points closer than this are reported as one multiple root.
pub const ROOT_MERGE_TOL: f64 = 1e-8;
/// Residual bound on polished polynomial roots.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-12;

/// `V(x) = num(x) / den(x)` with complex coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalPotential {
    pub num: Poly,
    pub den: Poly,
    pub label: Option<String>,
}

/// A finite pole with its order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub location: Complex64,
    pub order: usize,
}

/// Behaviour of `q̃` at infinity: `q̃ ~ c x^order`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfinityBehaviour {
    pub order: i64,
    pub leading: Complex64,
    /// Whether `∫ sqrt(q̃)` diverges at infinity.
    pub w_divergent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityList {
    pub entries: Vec<Singularity>,
    pub infinity: InfinityBehaviour,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub location: Complex64,
    pub multiplicity: usize,
}

impl RationalPotential {
    pub fn new(num: Poly, den: Poly, label: Option<String>) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::NonRationalInput("zero denominator".into()));
        }
        let all_finite = num.coeffs().iter().chain(den.coeffs()).all(|c| c.re.is_finite() && c.im.is_finite());
        if !all_finite {
            return Err(Error::NonRationalInput("non-finite coefficient".into()));
        }
        let pot = RationalPotential { num, den, label };
        pot.check_reduced()?;
        Ok(pot)
    }

    /// `V = (x² − 1)/(x² + 1)²`.
    pub fn double_hump() -> Self {
        RationalPotential {
            num: Poly::from_real(&[-1.0, 0.0, 1.0]),
            den: Poly::from_real(&[1.0, 0.0, 2.0, 0.0, 1.0]),
            label: Some("double-hump".into()),
        }
    }

    /// Radial Coulomb potential `−α/r + ħ² l(l+1)/r²` in reduced form.
    pub fn coulomb(alpha: f64, l: u32, hbar: f64) -> Self {
        let cent = hbar * hbar * (l as f64) * (l as f64 + 1.0);
        let (num, den) = if l == 0 {
            (Poly::from_real(&[-alpha]), Poly::from_real(&[0.0, 1.0]))
        } else {
            (Poly::from_real(&[cent, -alpha]), Poly::from_real(&[0.0, 0.0, 1.0]))
        };
        RationalPotential { num, den, label: Some(format!("coulomb(alpha={alpha}, l={l})")) }
    }

    /// `V = x²`.
    pub fn harmonic() -> Self {
        RationalPotential {
            num: Poly::from_real(&[0.0, 0.0, 1.0]),
            den: Poly::from_real(&[1.0]),
            label: Some("harmonic".into()),
        }
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.num.eval(x) / self.den.eval(x)
    }

    /// True when every coefficient is real.
    pub fn is_real(&self) -> bool {
        self.num.coeffs().iter().chain(self.den.coeffs()).all(|c| c.im == 0.0)
    }

    /// Finite poles of `V` with their orders.
    pub fn poles(&self) -> Result<Vec<Singularity>> {
        let roots = self.den.roots()?;
        let mut out = Vec::new();
        for (mut z, m) in cluster_roots(&roots, POLE_CLUSTER_TOL) {
            // polish on the (m-1)-th derivative, where the root is simple
            let mut d = self.den.clone();
            for _ in 1..m {
                d = d.deriv();
            }
            let dd = d.deriv();
            for _ in 0..4 {
                let slope = dd.eval(z);
                if slope == ZERO {
                    break;
                }
                let step = d.eval(z) / slope;
                if !step.re.is_finite() || step.norm() > 1e-4 * (1.0 + z.norm()) {
                    break;
                }
                z -= step;
            }
            out.push(Singularity { location: z, order: m });
        }
        out.sort_by(|a, b| cmp_complex(a.location, b.location));
        Ok(out)
    }

    fn check_reduced(&self) -> Result<()> {
        if self.num.is_zero() || self.num.degree() == Some(0) {
            return Ok(());
        }
        let zeros = self.num.roots()?;
        for p in self.poles()? {
            for z in &zeros {
                if (z - p.location).norm() < 1e-8 * (1.0 + p.location.norm()) {
                    return Err(Error::NonRationalInput(format!(
                        "numerator and denominator share the root {}",
                        p.location
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Total order on complex numbers: real part, then imaginary part.
pub fn cmp_complex(a: Complex64, b: Complex64) -> std::cmp::Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
}

/// `q̃(x) = V(x) − E + ħ² δ(x)`, with `δ = Σ 1/(4(x − z_k)²)` over first and
/// second order poles of `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveQ {
    pub base: RationalPotential,
    pub energy: Complex64,
    pub hbar: f64,
    langer: bool,
    /// Poles carrying a Langer term.
    pub langer_poles: Vec<Complex64>,
    poles: Vec<Singularity>,
    q_num: Poly,
    q_num_d1: Poly,
    q_num_d2: Poly,
    den: Poly,
    den_d1: Poly,
    den_d2: Poly,
    qt_num: Poly,
    qt_den: Poly,
}

/// Values of `q̃` and its first two derivatives at a point.
#[derive(Debug, Clone, Copy)]
pub struct QDerivs {
    pub q: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
    pub delta: Complex64,
}

pub fn build_effective_q(potential: &RationalPotential, energy: Complex64, hbar: f64) -> Result<EffectiveQ> {
    EffectiveQ::assemble(potential, energy, hbar, true)
}

impl EffectiveQ {
    /// Same construction without the Langer term (used to show it is needed).
    pub fn without_langer(potential: &RationalPotential, energy: Complex64, hbar: f64) -> Result<EffectiveQ> {
        Self::assemble(potential, energy, hbar, false)
    }

    fn assemble(potential: &RationalPotential, energy: Complex64, hbar: f64, langer: bool) -> Result<EffectiveQ> {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::NonRationalInput(format!("hbar must be positive, got {hbar}")));
        }
        let poles = potential.poles()?;
        let den = potential.den.clone();
        let q_num = potential.num.sub(&den.scale(energy));
        let langer_poles: Vec<Complex64> = if langer {
            poles.iter().filter(|p| p.order <= 2).map(|p| p.location).collect()
        } else {
            Vec::new()
        };
        // clear denominators: D~ = D * prod over simple Langer poles of (x - z)
        let mut qt_den = den.clone();
        let mut qt_num = q_num.clone();
        for p in poles.iter().filter(|p| p.order == 1 && langer) {
            let f = Poly::linear(p.location);
            qt_den = qt_den.mul(&f);
            qt_num = qt_num.mul(&f);
        }
        let h2 = hbar * hbar / 4.0;
        for &z in &langer_poles {
            let (q1, _) = qt_den.div_linear(z);
            let (q2, _) = q1.div_linear(z);
            qt_num = qt_num.add(&q2.scale(Complex64::new(h2, 0.0)));
        }
        Ok(EffectiveQ {
            base: potential.clone(),
            energy,
            hbar,
            langer,
            langer_poles,
            poles,
            q_num_d1: q_num.deriv(),
            q_num_d2: q_num.deriv().deriv(),
            q_num,
            den_d1: den.deriv(),
            den_d2: den.deriv().deriv(),
            den,
            qt_num,
            qt_den,
        })
    }

    /// Copy with a different energy.
    pub fn with_energy(&self, energy: Complex64) -> Result<EffectiveQ> {
        Self::assemble(&self.base, energy, self.hbar, self.langer)
    }

    pub fn has_langer(&self) -> bool {
        !self.langer_poles.is_empty()
    }

    pub fn poles(&self) -> &[Singularity] {
        &self.poles
    }

    /// Numerator and denominator of `q̃` after clearing all denominators.
    pub fn cleared(&self) -> (&Poly, &Poly) {
        (&self.qt_num, &self.qt_den)
    }

    /// `q = V − E` (no Langer term).
    pub fn q(&self, x: Complex64) -> Complex64 {
        self.q_num.eval(x) / self.den.eval(x)
    }

    pub fn delta(&self, x: Complex64) -> Complex64 {
        self.langer_poles.iter().map(|&z| 0.25 / ((x - z) * (x - z))).sum()
    }

    pub fn qt(&self, x: Complex64) -> Complex64 {
        self.q(x) + self.hbar * self.hbar * self.delta(x)
    }

    /// `q̃`, `q̃'`, `q̃''` and `δ` at `x`.
    pub fn derivs(&self, x: Complex64) -> QDerivs {
        let n = self.q_num.eval(x);
        let n1 = self.q_num_d1.eval(x);
        let n2 = self.q_num_d2.eval(x);
        let d = self.den.eval(x);
        let d1 = self.den_d1.eval(x);
        let d2 = self.den_d2.eval(x);
        let q = n / d;
        let q1 = (n1 - q * d1) / d;
        let q2 = (n2 - 2.0 * q1 * d1 - q * d2) / d;
        let mut delta = ZERO;
        let mut delta1 = ZERO;
        let mut delta2 = ZERO;
        for &z in &self.langer_poles {
            let u = 1.0 / (x - z);
            let u2 = u * u;
            delta += 0.25 * u2;
            delta1 -= 0.5 * u2 * u;
            delta2 += 1.5 * u2 * u2;
        }
        let h2 = self.hbar * self.hbar;
        QDerivs { q: q + h2 * delta, d1: q1 + h2 * delta1, d2: q2 + h2 * delta2, delta }
    }

    /// Laurent coefficients of `q = V − E` at a finite pole `z` of order `m`:
    /// returns `c_j` with `q = Σ_{j≥0} c_j u^{j−m}`, `u = x − z`.
    pub fn laurent_q_at_pole(&self, z: Complex64, m: usize, nterms: usize) -> Vec<Complex64> {
        let mut d = self.den.clone();
        for _ in 0..m {
            d = d.div_linear(z).0;
        }
        series_div(self.q_num.taylor_shift(z).coeffs(), d.taylor_shift(z).coeffs(), nterms)
    }

    /// Same as [`Self::laurent_q_at_pole`] for `q̃` (Langer included).
    pub fn laurent_qt_at_pole(&self, z: Complex64, m: usize, nterms: usize) -> Vec<Complex64> {
        let mut c = self.laurent_q_at_pole(z, m, nterms);
        let h2 = self.hbar * self.hbar;
        for &zk in &self.langer_poles {
            if (zk - z).norm() < 1e-12 * (1.0 + z.norm()) {
                // 1/(4u²) sits at index m − 2
                if m >= 2 {
                    c[m - 2] += 0.25 * h2;
                } else {
                    c.insert(0, Complex64::new(0.25 * h2, 0.0));
                    c.truncate(nterms);
                }
            } else {
                // regular Langer term of another pole: expand 1/(4(u + z − zk)²)
                let a = z - zk;
                for j in 0..nterms {
                    let idx = j + m;
                    if idx >= c.len() {
                        break;
                    }
                    // 1/(4(a+u)^2) = Σ (j+1)(-1)^j u^j / (4 a^{j+2})
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    c[idx] += h2 * 0.25 * sign * (j as f64 + 1.0) / a.powu(j as u32 + 2);
                }
            }
        }
        c
    }

    /// Taylor coefficients of `q(1/t)` and `q̃(1/t)` at `t = 0` (requires
    /// `q → const` at infinity).
    pub fn taylor_at_infinity(&self, nterms: usize) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let dn = self.q_num.degree().unwrap_or(0);
        let dd = self.den.degree().unwrap_or(0);
        if self.q_num.is_zero() || dn != dd {
            return Err(Error::Unsupported("series at infinity needs q -> nonzero constant".into()));
        }
        let q = series_div(self.q_num.reversed().coeffs(), self.den.reversed().coeffs(), nterms);
        let mut qt = q.clone();
        let h2 = self.hbar * self.hbar;
        for &z in &self.langer_poles {
            // 1/(4(1/t − z)²) = t²/(4(1 − z t)²) = Σ_{j≥0} (j+1) z^j t^{j+2} / 4
            for j in 0..nterms {
                if j + 2 >= nterms {
                    break;
                }
                qt[j + 2] += h2 * 0.25 * (j as f64 + 1.0) * z.powu(j as u32);
            }
        }
        Ok((q, qt))
    }

    pub fn classify_singularities(&self) -> SingularityList {
        let entries = self
            .poles
            .iter()
            .map(|p| Singularity {
                location: p.location,
                order: if self.has_langer() && p.order <= 2 { 2 } else { p.order },
            })
            .collect();
        let order = self.qt_num.degree().unwrap_or(0) as i64 - self.qt_den.degree().unwrap_or(0) as i64;
        let leading = self.qt_num.leading() / self.qt_den.leading();
        SingularityList {
            entries,
            infinity: InfinityBehaviour { order, leading, w_divergent: !self.qt_num.is_zero() && order >= -2 },
        }
    }

    pub fn find_turning_points(&self) -> Result<Vec<TurningPoint>> {
        if self.qt_num.degree().unwrap_or(0) == 0 {
            return Ok(Vec::new());
        }
        let roots = self.qt_num.roots()?;
        let mut worst: f64 = 0.0;
        for r in &roots {
            worst = worst.max(self.qt_num.relative_residual(*r));
        }
        let clustered = cluster_roots(&roots, ROOT_MERGE_TOL);
        let mut out = Vec::new();
        for (z, m) in clustered {
            let near_pole = self.poles.iter().any(|p| (p.location - z).norm() < 1e-8 * (1.0 + z.norm()));
            if near_pole {
                continue;
            }
            out.push(TurningPoint { location: z, multiplicity: m });
        }
        // multiple roots converge slowly; only simple ones must meet the bound
        if out.iter().all(|t| t.multiplicity == 1) && worst > ROOT_RESIDUAL_TOL {
            return Err(Error::RootFindingFailed { residual: worst });
        }
        out.sort_by(|a, b| cmp_complex(a.location, b.location));
        Ok(out)
    }
}

/// Power-series quotient `a / b` up to `nterms` coefficients (`b[0] ≠ 0`).
pub fn series_div(a: &[Complex64], b: &[Complex64], nterms: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; nterms];
    for n in 0..nterms {
        let mut acc = a.get(n).copied().unwrap_or(ZERO);
        for j in 1..=n.min(b.len().saturating_sub(1)) {
            acc -= b[j] * out[n - j];
        }
        out[n] = acc / b[0];
    }
    out
}
