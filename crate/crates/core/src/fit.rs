//! Small statistical helpers: log-log least squares and binomial intervals.

use serde::Serialize;

use crate::error::{Error, Result};

/// Ordinary least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        r2,
        points: n,
    })
}

/// Fits `log values[n]` against `log n` for every index `n` in `[lo, hi]`.
pub fn loglog_fit(values: &[f64], lo: usize, hi: usize) -> Result<LineFit> {
    let lo = lo.max(1);
    if hi >= values.len() || lo >= hi {
        return Err(Error::EmptyWindow { lo, hi });
    }
    let mut xs = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for (n, &v) in values.iter().enumerate().take(hi + 1).skip(lo) {
        if !(v > 0.0) {
            return Err(Error::NonPositiveValues { index: n, value: v });
        }
        xs.push((n as f64).ln());
        ys.push(v.ln());
    }
    least_squares(&xs, &ys).ok_or(Error::EmptyWindow { lo, hi })
}

/// Evidence-based call on whether a series converges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

/// Relative growth of a nondecreasing partial-sum sequence over its last
/// decade: `(S[n] - S[n/10]) / S[n/10]`.
pub fn last_decade_increment(partial: &[f64]) -> f64 {
    let n = partial.len() - 1;
    let earlier = partial[(n / 10).max(1)];
    if earlier == 0.0 {
        return f64::INFINITY;
    }
    (partial[n] - earlier) / earlier
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The exact interval always contains p; clamping removes rounding at p = 0 or 1.
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}
