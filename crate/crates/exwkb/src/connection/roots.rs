//! Root finding on fallible functions.

use std::cell::{Cell, RefCell};

use num_complex::Complex64;
use roots::{find_root_brent, SimpleConvergency};

use crate::error::{Error, Result};

/// Brent's method on a bracket; the function may fail, in which case the
/// first error is returned. Yields the root and the number of evaluations.
pub(crate) fn brent<F: FnMut(f64) -> Result<f64>>(mut f: F, lo: f64, hi: f64, eps: f64) -> Result<(f64, usize)> {
    let err: RefCell<Option<Error>> = RefCell::new(None);
    let count = Cell::new(0usize);
    let g = |x: f64| -> f64 {
        count.set(count.get() + 1);
        if err.borrow().is_some() {
            return f64::NAN;
        }
        match f(x) {
            Ok(v) => v,
            Err(e) => {
                *err.borrow_mut() = Some(e);
                f64::NAN
            }
        }
    };
    let mut conv = SimpleConvergency { eps, max_iter: 200 };
    let r = find_root_brent(lo, hi, g, &mut conv);
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    r.map(|x| (x, count.get())).map_err(|_| Error::NoRootInWindow { lo, hi })
}

/// Secant iteration in the complex plane from `x0`, `x1`. Stops once a step
/// is below `tol` relative to the imaginary part, plus one ulp-scale margin
/// on the real part, so that very small imaginary parts are still resolved.
pub(crate) fn complex_secant<F: FnMut(Complex64) -> Result<Complex64>>(
    mut f: F,
    x0: Complex64,
    x1: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<(Complex64, Complex64, usize)> {
    let (mut a, mut b) = (x0, x1);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    for it in 0..max_iter {
        if fb.norm() == 0.0 {
            return Ok((b, fb, it));
        }
        let d = fb - fa;
        if d.norm() == 0.0 {
            break;
        }
        let c = b - fb * (b - a) / d;
        if !c.is_finite() {
            break;
        }
        let step = (c - b).norm();
        a = b;
        fa = fb;
        b = c;
        fb = f(b)?;
        if step <= tol * b.im.abs() + 4.0 * f64::EPSILON * b.re.abs() {
            return Ok((b, fb, it + 1));
        }
    }
    Err(Error::SeedDivergence { seed: x0 })
}
