//! Scalar root bracketing/bisection and golden-section maximization.

use crate::error::{Error, Result};

/// Bisect a continuous function with `f(lo)` and `f(hi)` of opposite sign
/// down to interval width `xtol` (or at most `max_iter` halvings).
///
/// Returns the midpoint of the final bracket. The caller must supply a valid
/// sign change; this is checked and reported as [`Error::NoBracket`].
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "bisect needs lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut flo = f(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    let fhi = f(hi);
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket(format!(
            "no sign change on [{lo}, {hi}]: f(lo) = {flo:e}, f(hi) = {fhi:e}"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section search for the maximum of a unimodal function on [lo, hi].
///
/// Returns `(x*, f(x*))` once the bracket is narrower than `xtol`. On
/// functions that are not strictly unimodal it still converges to a local
/// maximum no worse than the best probe seen.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    if !(hi > lo) {
        return (lo, f(lo));
    }
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // Track the best probe so a plateau or slight non-unimodality cannot
    // return a value below something already evaluated.
    let mut best_x = if f1 >= f2 { x1 } else { x2 };
    let mut best_f = f1.max(f2);
    while b - a > xtol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        let (xc, fc) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        if fc > best_f {
            best_f = fc;
            best_x = xc;
        }
        if x1 >= x2 {
            break;
        }
    }
    (best_x, best_f)
}
