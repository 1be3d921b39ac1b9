//! First-return inducing of the Manneville-Pomeau map on `Y = [1/2, 1]`.
//!
//! With `y_0 = 1/2` and `y_{k+1}` the left-branch preimage of `y_k`, the
//! points `y'_{k+1} = (1 + y_k) / 2` are the right-branch preimages and the
//! return-time cylinders are `{tau = n} = [y'_n, y'_{n-1})` with the
//! convention `y'_0 = 1`. Consequently `Leb{tau >= n + 2} = y_n / 2`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{last_decade_increment, loglog_fit, LineFit, Verdict};
use crate::maps::{MapKind, MapSpec};
use crate::rng::StreamRng;
use crate::root::solve_monotone;

/// Left end of the inducing set `Y = [1/2, 1]`.
pub const Y_LO: f64 = 0.5;
pub const DEFAULT_RETURN_CAP: u64 = 100_000_000;
const RESIDUAL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnTime {
    Returned(u64),
    Censored(u64),
}

impl ReturnTime {
    pub fn value(self) -> Option<u64> {
        match self {
            ReturnTime::Returned(n) => Some(n),
            ReturnTime::Censored(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cylinder {
    pub lo: f64,
    pub hi: f64,
    pub return_time: u64,
}

impl Cylinder {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Preimage sequences and return-time cylinders for the induced map on `Y`.
#[derive(Debug, Clone, Serialize)]
pub struct ReturnStructure {
    alpha: f64,
    n_max: usize,
    y_seq: Vec<f64>,
    yprime_seq: Vec<f64>,
    cylinders: Vec<Cylinder>,
}

fn manpom_alpha(map: &MapSpec) -> Result<f64> {
    match map.kind() {
        MapKind::ManPom { alpha } => Ok(*alpha),
        _ => Err(Error::InvalidParameter(format!(
            "inducing on [1/2, 1] needs a Manneville-Pomeau map, got {map}"
        ))),
    }
}

/// Computes `y_0..=y_{n_max}` and `y'_0..=y'_{n_max}`.
pub fn compute_yn(map: &MapSpec, n_max: usize) -> Result<ReturnStructure> {
    let alpha = manpom_alpha(map)?;
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let left = map.branches()[0];
    let mut y_seq = Vec::with_capacity(n_max + 1);
    y_seq.push(Y_LO);
    for k in 1..=n_max {
        let prev = y_seq[k - 1];
        let y = solve_monotone(|x| left.value(x), |x| left.derivative(x), prev, 0.0, prev)?;
        let residual = (left.value(y) - prev).abs();
        if residual >= RESIDUAL_TOL || !(y < prev) {
            return Err(Error::NonConvergence {
                context: format!("preimage y_{k} of {prev}"),
                iterations: k,
                increment: residual,
            });
        }
        y_seq.push(y);
    }
    let mut yprime_seq = Vec::with_capacity(n_max + 1);
    yprime_seq.push(1.0);
    yprime_seq.extend(y_seq[..n_max].iter().map(|&y| 0.5 * (1.0 + y)));
    Ok(ReturnStructure {
        alpha,
        n_max,
        y_seq,
        yprime_seq,
        cylinders: Vec::new(),
    })
}

/// Like [`compute_yn`], additionally listing the cylinders `{tau = n}` for
/// `n = 1..=n_max`.
pub fn cylinder_partition(map: &MapSpec, n_max: usize) -> Result<ReturnStructure> {
    let mut rs = compute_yn(map, n_max)?;
    rs.cylinders = (1..=n_max)
        .map(|n| Cylinder {
            lo: rs.yprime_seq[n],
            hi: rs.yprime_seq[n - 1],
            return_time: n as u64,
        })
        .collect();
    Ok(rs)
}

impl ReturnStructure {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn y_seq(&self) -> &[f64] {
        &self.y_seq
    }

    pub fn yprime_seq(&self) -> &[f64] {
        &self.yprime_seq
    }

    pub fn cylinders(&self) -> &[Cylinder] {
        &self.cylinders
    }

    /// `Leb{y in Y : tau(y) >= n}` for `1 <= n <= n_max + 1`.
    pub fn tail(&self, n: usize) -> f64 {
        assert!(n >= 1 && n <= self.n_max + 1, "tail index {n} out of range");
        if n == 1 {
            0.5
        } else {
            0.5 * self.y_seq[n - 2]
        }
    }

    /// `Leb{tau = n}` for `1 <= n <= n_max`.
    pub fn cylinder_measure(&self, n: usize) -> f64 {
        if n == 1 {
            0.25
        } else {
            0.5 * (self.y_seq[n - 2] - self.y_seq[n - 1])
        }
    }

    /// `Leb{tau > n_max}`: the mass not covered by the listed cylinders.
    pub fn uncovered_mass(&self) -> f64 {
        self.tail(self.n_max + 1)
    }

    /// Return time read off the partition, `None` when it exceeds `n_max`.
    pub fn cylinder_index(&self, y: f64) -> Option<u64> {
        if !(Y_LO..=1.0).contains(&y) {
            return None;
        }
        // yprime_seq is strictly decreasing; find the first index with y'_n <= y.
        let n = self.yprime_seq.partition_point(|&yp| yp > y);
        if n == 0 {
            // y == 1 exactly.
            Some(1)
        } else if n > self.n_max {
            None
        } else {
            Some(n as u64)
        }
    }
}

/// First return time to `Y` by direct iteration.
pub fn return_time(map: &MapSpec, y: f64, cap: u64) -> Result<ReturnTime> {
    induced_step_raw(map, y, cap).map(|(_, t)| t)
}

/// `(F(y), tau(y))` for the first-return map `F = T^tau`.
pub fn induced_step(map: &MapSpec, y: f64, cap: u64) -> Result<(f64, u64)> {
    match induced_step_raw(map, y, cap)? {
        (x, ReturnTime::Returned(n)) => Ok((x, n)),
        (_, ReturnTime::Censored(cap)) => Err(Error::Censored { cap }),
    }
}

fn induced_step_raw(map: &MapSpec, y: f64, cap: u64) -> Result<(f64, ReturnTime)> {
    if !(y >= Y_LO - crate::maps::DOMAIN_TOL && y <= 1.0 + crate::maps::DOMAIN_TOL) {
        return Err(Error::InvalidParameter(format!("{y} is not in Y = [1/2, 1]")));
    }
    let mut x = y.clamp(Y_LO, 1.0);
    for n in 1..=cap {
        x = map.step(x);
        if x >= Y_LO {
            return Ok((x, ReturnTime::Returned(n)));
        }
    }
    Ok((x, ReturnTime::Censored(cap)))
}

/// Return-time tail statistics.
#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    /// `tail[n] = Leb{tau >= n}` for `n = 0..=n_max` (`tail[0] = tail[1] = 1/2`).
    pub tail: Vec<f64>,
    /// `partial_sums[n] = sum_{k <= n} k Leb{tau = k}`.
    pub partial_sums: Vec<f64>,
    pub window: (usize, usize),
    pub fit: LineFit,
    /// Relative growth of the partial sums over the last decade.
    pub last_decade_increment: f64,
    pub verdict: Verdict,
}

/// Below this last-decade increment the partial sums are called convergent.
pub const TAIL_CONVERGENT_INCREMENT: f64 = 0.01;
/// Above this the partial sums are called divergent.
pub const TAIL_DIVERGENT_INCREMENT: f64 = 0.10;

/// Default fit window `[min(100, n_max/100), n_max/10]`.
pub fn default_window(n_max: usize) -> (usize, usize) {
    (100.min((n_max / 100).max(1)), n_max / 10)
}

pub fn tail_measure(map: &MapSpec, n_max: usize, window: Option<(usize, usize)>) -> Result<TailReport> {
    if n_max < 20 {
        return Err(Error::InvalidParameter("tail_measure needs n_max >= 20".into()));
    }
    let rs = compute_yn(map, n_max)?;
    tail_from_structure(&rs, window)
}

pub fn tail_from_structure(rs: &ReturnStructure, window: Option<(usize, usize)>) -> Result<TailReport> {
    let n_max = rs.n_max();
    let mut tail = Vec::with_capacity(n_max + 1);
    tail.push(0.5);
    tail.extend((1..=n_max).map(|n| rs.tail(n)));
    let mut partial_sums = Vec::with_capacity(n_max + 1);
    partial_sums.push(0.0);
    let mut acc = 0.0;
    for n in 1..=n_max {
        acc += n as f64 * rs.cylinder_measure(n);
        partial_sums.push(acc);
    }
    let window = window.unwrap_or_else(|| default_window(n_max));
    let fit = loglog_fit(&tail, window.0, window.1)?;
    let inc = last_decade_increment(&partial_sums);
    let verdict = if inc < TAIL_CONVERGENT_INCREMENT {
        Verdict::Convergent
    } else if inc > TAIL_DIVERGENT_INCREMENT {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    Ok(TailReport {
        tail,
        partial_sums,
        window,
        fit,
        last_decade_increment: inc,
        verdict,
    })
}

/// Sampling plan for [`distortion_estimate`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistortionPlan {
    pub depth: usize,
    pub samples_per_cylinder: usize,
    /// Largest return time used at each level of an itinerary.
    pub max_return: u64,
    /// Random itineraries drawn per depth beyond the first.
    pub cylinders_per_level: usize,
    pub seed: u64,
}

impl Default for DistortionPlan {
    fn default() -> Self {
        Self {
            depth: 3,
            samples_per_cylinder: 1000,
            max_return: 50,
            cylinders_per_level: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionReport {
    /// `k_hat[k-1]`: running sup of `max J / min J` over cylinders of depth `<= k`.
    pub k_hat: Vec<f64>,
    pub cylinders_examined: Vec<usize>,
    pub skipped: usize,
}

/// Numerical sup of the Jacobian ratio of `F^k` over sampled cylinders.
///
/// Points of a depth-k cylinder are produced by pulling uniform samples of
/// `Y` back through the inverse branches of `F`, accumulating `log J` along
/// the way; pullbacks are contracting so this stays accurate even for very
/// thin cylinders.
pub fn distortion_estimate(map: &MapSpec, plan: &DistortionPlan) -> Result<DistortionReport> {
    let alpha = manpom_alpha(map)?;
    if plan.depth == 0 || plan.samples_per_cylinder < 2 || plan.max_return == 0 {
        return Err(Error::InvalidParameter(
            "distortion needs depth >= 1, samples >= 2 and max_return >= 1".into(),
        ));
    }
    let mut k_hat = Vec::with_capacity(plan.depth);
    let mut examined = Vec::with_capacity(plan.depth);
    let mut skipped = 0;
    let mut running: f64 = 1.0;
    for depth in 1..=plan.depth {
        let itineraries = itineraries_for(depth, plan);
        let ratios: Vec<Option<f64>> = itineraries
            .par_iter()
            .enumerate()
            .map(|(idx, it)| {
                let mut rng = StreamRng::new(plan.seed, depth as u64, idx as u64);
                cylinder_ratio(alpha, it, plan.samples_per_cylinder, &mut rng)
            })
            .collect();
        for r in &ratios {
            match r {
                Some(v) => running = running.max(*v),
                None => skipped += 1,
            }
        }
        k_hat.push(running);
        examined.push(ratios.iter().filter(|r| r.is_some()).count());
    }
    Ok(DistortionReport {
        k_hat,
        cylinders_examined: examined,
        skipped,
    })
}

fn itineraries_for(depth: usize, plan: &DistortionPlan) -> Vec<Vec<u64>> {
    let m = plan.max_return;
    if depth == 1 {
        return (1..=m).map(|n| vec![n]).collect();
    }
    let mut out = vec![
        vec![1; depth],
        vec![m; depth],
        (0..depth).map(|i| if i % 2 == 0 { 1 } else { m }).collect(),
        (0..depth).map(|i| if i % 2 == 0 { m } else { 1 }).collect(),
    ];
    let mut rng = StreamRng::new(plan.seed, 1_000 + depth as u64, u64::MAX);
    for _ in 0..plan.cylinders_per_level {
        out.push((0..depth).map(|_| 1 + rng.next_u64() % m).collect());
    }
    out
}

/// Preimage of `w` under the left branch `x(1 + (2x)^alpha)`.
///
/// The branch is convex and increasing, so Newton started to the right of the
/// root decreases monotonically onto it.
fn left_inverse(alpha: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let mut x = w.min(0.5);
    for _ in 0..100 {
        let p = (2.0 * x).powf(alpha);
        let f = x * (1.0 + p) - w;
        let df = 1.0 + (1.0 + alpha) * p;
        let next = x - f / df;
        if !(next < x) || next <= 0.0 {
            break;
        }
        x = next;
    }
    x
}

/// `max J / min J` of `F^k` on the cylinder with the given itinerary.
fn cylinder_ratio(alpha: f64, itinerary: &[u64], samples: usize, rng: &mut StreamRng) -> Option<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in 0..samples {
        let z = match s {
            0 => Y_LO,
            1 => 1.0,
            _ => rng.uniform_in(Y_LO, 1.0),
        };
        let mut w = z;
        let mut log_j = 0.0;
        for &n in itinerary.iter().rev() {
            for _ in 1..n {
                w = left_inverse(alpha, w);
                log_j += (1.0 + (1.0 + alpha) * (2.0 * w).powf(alpha)).ln();
            }
            w = 0.5 * (1.0 + w);
            log_j += std::f64::consts::LN_2;
        }
        if !log_j.is_finite() {
            return None;
        }
        lo = lo.min(log_j);
        hi = hi.max(log_j);
    }
    Some((hi - lo).exp())
}
