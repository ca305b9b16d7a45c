//! Bracketed root finding.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root<T> {
    pub x: T,
    pub fx: T,
    pub iterations: usize,
}

const MAX_ITER: usize = 400;

/// Finds a root of `f` in `[lo, hi]` and returns it.
///
/// Brent's method: inverse quadratic / secant steps, falling back to bisection
/// whenever the interpolated step does not shrink the bracket fast enough.
/// The result always lies in `[min(lo, hi), max(lo, hi)]`.
pub fn solve_bracketed<T, F>(f: F, lo: T, hi: T, tol: T) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> T,
{
    brent(f, lo, hi, tol).map(|r| r.x)
}

pub fn brent<T, F>(mut f: F, lo: T, hi: T, tol: T) -> Result<Root<T>>
where
    T: Real,
    F: FnMut(T) -> T,
{
    if !(lo.is_finite() && hi.is_finite() && tol > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "bracket [{lo}, {hi}] and tolerance {tol} must be finite and positive"
        )));
    }
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let half = T::lit(0.5);
    let eps = T::epsilon();

    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::InvalidInput("function is NaN at a bracket end".into()));
    }
    if fa == T::zero() {
        return Ok(Root { x: a, fx: fa, iterations: 0 });
    }
    if fb == T::zero() {
        return Ok(Root { x: b, fx: fb, iterations: 0 });
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(Error::Bracketing { f_lo: fa.as_f64(), f_hi: fb.as_f64() });
    }

    let (mut c, mut fc) = (b, fb);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=MAX_ITER {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * eps * b.abs() + half * tol;
        let xm = half * (c - b);
        if xm.abs() <= tol1 || fb == T::zero() {
            return Ok(Root { x: b, fx: fb, iterations: iter });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * xm * s;
                q = T::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (two * xm * qq * (qq - r) - (b - a) * (r - T::one()));
                q = (qq - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = three * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b = b + d;
        } else {
            b = b + tol1.copysign(xm);
        }
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::Solver {
                message: format!("function returned NaN at {b}"),
                trace: vec![(a.as_f64(), c.as_f64())],
            });
        }
    }
    Err(Error::Solver {
        message: format!("no convergence after {MAX_ITER} iterations"),
        trace: vec![(b.as_f64(), c.as_f64())],
    })
}
