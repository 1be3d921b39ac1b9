//! Bracketed root finding for monotone branches.

use crate::error::{Error, Result};

/// Relative bracket width at which bisection hands over to Newton.
pub const BISECTION_WIDTH: f64 = 1e-15;
/// Newton polishing steps after bisection.
pub const NEWTON_STEPS: usize = 3;
const MAX_BISECTIONS: usize = 2_000;

/// Solves `f(x) = target` for a continuous strictly monotone `f` on `[lo, hi]`.
///
/// Bisection shrinks the bracket to `BISECTION_WIDTH * max(|lo|, |hi|)` (or
/// until the midpoint is no longer representable), then up to three Newton
/// steps polish the midpoint. A Newton step that leaves the bracket is
/// discarded and the bisection estimate is kept.
pub fn solve_monotone<F, D>(f: F, df: D, target: f64, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if !(lo <= hi) || !target.is_finite() {
        return Err(Error::NonConvergence {
            context: format!("bad bracket [{lo}, {hi}] for target {target}"),
            iterations: 0,
            increment: f64::NAN,
        });
    }
    let (flo, fhi) = (f(lo) - target, f(hi) - target);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NonConvergence {
            context: format!(
                "target {target} not bracketed by f({lo}) = {} and f({hi}) = {}",
                flo + target,
                fhi + target
            ),
            iterations: 0,
            increment: f64::NAN,
        });
    }
    let increasing = fhi > flo;
    let (mut a, mut b) = (lo, hi);
    let mut iterations = 0;
    while b - a > BISECTION_WIDTH * a.abs().max(b.abs()) {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid) - target;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == increasing {
            a = mid;
        } else {
            b = mid;
        }
        iterations += 1;
        if iterations > MAX_BISECTIONS {
            return Err(Error::NonConvergence {
                context: format!("bisection for target {target}"),
                iterations,
                increment: b - a,
            });
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..NEWTON_STEPS {
        let slope = df(x);
        if !(slope.is_finite() && slope != 0.0) {
            break;
        }
        let next = x - (f(x) - target) / slope;
        if !(next >= a && next <= b) {
            break;
        }
        x = next;
    }
    Ok(x)
}
