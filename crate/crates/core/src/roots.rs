//! Inversion of monotone scalar maps on a known bracket.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative bracket width at which bisection hands over to Newton polishing.
pub const BISECTION_REL_WIDTH: f64 = 1e-12;

/// Finds a zero of the non-decreasing residual `f` inside `[lo, hi]`.
///
/// Requires `f(lo) <= 0 <= f(hi)`. Bisection runs until the bracket is
/// narrower than `1e-12 * max(1, |t|)`; when `slope` is supplied two Newton
/// steps follow, each accepted only if it stays inside the final bracket and
/// lowers the residual.
pub fn bracketed_root<T, F, D>(mut f: F, mut lo: T, mut hi: T, mut slope: Option<D>) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
    D: FnMut(T) -> T,
{
    if !(lo <= hi) {
        return Err(Error::Argument(format!(
            "empty bracket [{}, {}]",
            lo.as_f64(),
            hi.as_f64()
        )));
    }
    let two = T::lit(2.0);
    let rel = T::lit(BISECTION_REL_WIDTH).max(T::epsilon() * T::lit(4.0));
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    if f_lo > T::zero() || f_hi < T::zero() {
        return Err(Error::Argument(format!(
            "residual does not change sign on [{}, {}]",
            lo.as_f64(),
            hi.as_f64()
        )));
    }
    if f_lo == T::zero() {
        return Ok(lo);
    }
    if f_hi == T::zero() {
        return Ok(hi);
    }
    for _ in 0..4000 {
        let mid = lo + (hi - lo) / two;
        if hi - lo <= rel * T::one().max(mid.abs()) || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == T::zero() {
            return Ok(mid);
        }
        if fm < T::zero() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
            f_hi = fm;
        }
    }
    // best bracket end, by residual
    let (mut t, mut ft) = if -f_lo <= f_hi { (lo, f_lo) } else { (hi, f_hi) };
    if let Some(ref mut d) = slope {
        for _ in 0..2 {
            let s = d(t);
            if !(s.is_finite() && s > T::zero()) {
                break;
            }
            let cand = t - ft / s;
            if !(cand >= lo && cand <= hi) {
                break;
            }
            let fc = f(cand)?;
            if fc.abs() <= ft.abs() {
                t = cand;
                ft = fc;
            } else {
                break;
            }
        }
    }
    Ok(t)
}
