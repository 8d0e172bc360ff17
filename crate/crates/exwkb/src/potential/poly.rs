//! Dense univariate polynomials with complex coefficients.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Polynomial stored by ascending degree; trailing zeros are trimmed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last() == Some(&ZERO) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// The monic linear factor `x - z`.
    pub fn linear(z: Complex64) -> Self {
        Self::new(vec![-z, ONE])
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * x + c)
    }

    /// Sum of |c_k| |x|^k, the natural scale for residual tests.
    pub fn eval_abs(&self, x: Complex64) -> f64 {
        let r = x.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn deriv(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Poly, k: usize| p.coeffs.get(k).copied().unwrap_or(ZERO);
        Poly::new((0..n).map(|k| get(self, k) + get(other, k)).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-ONE))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn powi(&self, n: usize) -> Poly {
        (0..n).fold(Poly::constant(ONE), |acc, _| acc.mul(self))
    }

    /// Synthetic division by `x - z`; returns quotient and remainder.
    pub fn div_linear(&self, z: Complex64) -> (Poly, Complex64) {
        if self.coeffs.len() <= 1 {
            return (Poly::zero(), self.coeffs.first().copied().unwrap_or(ZERO));
        }
        let n = self.coeffs.len();
        let mut q = vec![ZERO; n - 1];
        let mut acc = ZERO;
        for k in (0..n).rev() {
            acc = acc * z + self.coeffs[k];
            if k > 0 {
                q[k - 1] = acc;
            }
        }
        (Poly::new(q), acc)
    }

    /// Coefficients of `p(z + u)` as a polynomial in `u`.
    pub fn taylor_shift(&self, z: Complex64) -> Poly {
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for k in (i..n.saturating_sub(1)).rev() {
                let t = c[k + 1] * z;
                c[k] += t;
            }
        }
        Poly::new(c)
    }

    /// Coefficients in reverse order: `x^deg p(1/x)`.
    pub fn reversed(&self) -> Poly {
        Poly::new(self.coeffs.iter().rev().copied().collect())
    }

    /// All roots via companion-matrix eigenvalues, then Newton polishing.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let deg = match self.degree() {
            None => return Err(Error::NonRationalInput("roots of the zero polynomial".into())),
            Some(d) => d,
        };
        if deg == 0 {
            return Ok(Vec::new());
        }
        let lead = self.leading();
        let mut m = DMatrix::<Complex64>::zeros(deg, deg);
        for i in 1..deg {
            m[(i, i - 1)] = ONE;
        }
        for j in 0..deg {
            m[(j, deg - 1)] = -self.coeffs[j] / lead;
        }
        let eig = companion_eigenvalues(m).ok_or(Error::RootFindingFailed { residual: f64::INFINITY })?;
        let dp = self.deriv();
        let mut roots = Vec::with_capacity(deg);
        for mut r in eig {
            for _ in 0..3 {
                let d = dp.eval(r);
                if d == ZERO {
                    break;
                }
                let step = self.eval(r) / d;
                let cand = r - step;
                if self.eval(cand).norm() <= self.eval(r).norm() {
                    r = cand;
                } else {
                    break;
                }
            }
            roots.push(r);
        }
        Ok(roots)
    }

    /// Relative residual |p(x)| / sum |c_k||x|^k.
    pub fn relative_residual(&self, x: Complex64) -> f64 {
        let s = self.eval_abs(x);
        if s == 0.0 {
            0.0
        } else {
            self.eval(x).norm() / s
        }
    }
}

/// QR iteration can stall on exactly repeated eigenvalues; an iteration cap
/// plus a tiny diagonal shift gets it moving again.
fn companion_eigenvalues(m: DMatrix<Complex64>) -> Option<Vec<Complex64>> {
    const MAX_SWEEPS: usize = 500;
    let n = m.nrows();
    let scale = m.iter().map(|c| c.norm()).fold(1.0, f64::max);
    for attempt in 0..4 {
        let shift = Complex64::new(0.3, 0.2) * scale * attempt as f64;
        let shifted = &m - DMatrix::<Complex64>::identity(n, n) * shift;
        if let Some(s) = shifted.try_schur(f64::EPSILON, MAX_SWEEPS * n) {
            return Some(s.eigenvalues()?.iter().map(|&e| e + shift).collect());
        }
    }
    None
}

/// Roots grouped into clusters closer than `tol`, refined to the cluster mean.
pub fn cluster_roots(roots: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    let mut used = vec![false; roots.len()];
    let mut out = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![roots[i]];
        used[i] = true;
        for j in i + 1..roots.len() {
            if !used[j] && (roots[j] - roots[i]).norm() < tol * (1.0 + roots[i].norm()) {
                members.push(roots[j]);
                used[j] = true;
            }
        }
        let mean = members.iter().sum::<Complex64>() / members.len() as f64;
        out.push((mean, members.len()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_and_derivative() {
        let p = Poly::from_real(&[1.0, -3.0, 0.0, 2.0]);
        assert_eq!(p.eval(c(2.0, 0.0)), c(11.0, 0.0));
        assert_eq!(p.deriv(), Poly::from_real(&[-3.0, 0.0, 6.0]));
    }

    #[test]
    fn taylor_shift_matches_direct_evaluation() {
        let p = Poly::new(vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 1.0), c(3.0, -1.0)]);
        let z = c(0.3, -0.7);
        let s = p.taylor_shift(z);
        for u in [c(0.1, 0.2), c(-1.0, 0.5)] {
            assert!((s.eval(u) - p.eval(z + u)).norm() < 1e-13);
        }
    }

    #[test]
    fn roots_of_quartic() {
        // (x^2 - 4)(x^2 + 1)
        let p = Poly::from_real(&[-4.0, 0.0, -3.0, 0.0, 1.0]);
        let mut r = p.roots().unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        let want = [c(-2.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(2.0, 0.0)];
        for (a, b) in r.iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn division_by_linear_factor() {
        let p = Poly::linear(c(1.0, 1.0)).mul(&Poly::from_real(&[2.0, 0.0, 1.0]));
        let (q, r) = p.div_linear(c(1.0, 1.0));
        assert!(r.norm() < 1e-14);
        assert!((q.eval(c(0.5, 0.0)) - c(2.25, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn clusters_merge_double_roots() {
        let p = Poly::from_real(&[1.0, 0.0, 2.0, 0.0, 1.0]);
        let cl = cluster_roots(&p.roots().unwrap(), 1e-6);
        assert_eq!(cl.len(), 2);
        assert!(cl.iter().all(|&(_, m)| m == 2));
    }
}
