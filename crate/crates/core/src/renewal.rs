//! Renewal sequence `u_n = Leb{y in Y : T^n y in Y}` and the summability
//! test `Σ u_n^d` that decides conservativity of the d-fold product.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{last_decade_increment, loglog_fit, LineFit, Verdict};
use crate::inducing::Y_LO;
use crate::maps::MapSpec;
use crate::rng::StreamRng;
use crate::transfer::UlamOperator;

/// Lebesgue measure of `Y = [1/2, 1]`.
pub const Y_MEASURE: f64 = 0.5;
/// Largest unobserved share of the extrapolated limit for a convergent call.
pub const MAX_REMAINDER_FRACTION: f64 = 0.5;
/// Raw last-decade growth above which `Σ u_n^d` is called divergent.
pub const DIVERGENT_INCREMENT: f64 = 0.05;
/// Relative drift of the extrapolated limit below which it is called convergent.
pub const CONVERGENT_INCREMENT: f64 = 0.005;

const RENEWAL_STREAM: u64 = 0x7265_6e65;
const SIMULTANEOUS_STREAM: u64 = 0x7369_6d75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Operator,
    MonteCarlo,
}

#[derive(Debug, Clone, Serialize)]
pub struct RenewalSeq {
    /// `u[n]` for `n = 0..=horizon`.
    pub u: Vec<f64>,
    pub method: Method,
    /// Binomial standard errors, Monte-Carlo only.
    pub stderr: Option<Vec<f64>>,
    pub samples: Option<u64>,
}

impl RenewalSeq {
    pub fn horizon(&self) -> usize {
        self.u.len() - 1
    }
}

/// `u_n = Σ_{A_i ⊆ Y} (L^n 1_Y)_i Leb(A_i)` on the Ulam operator.
pub fn un_operator(op: &UlamOperator, horizon: usize) -> Result<RenewalSeq> {
    let split = op
        .mesh()
        .boundary_index(Y_LO)
        .ok_or(Error::MeshMisaligned { point: Y_LO })?;
    let mut mass: Vec<f64> = op
        .widths()
        .iter()
        .enumerate()
        .map(|(i, &w)| if i >= split { w } else { 0.0 })
        .collect();
    let on_y = |m: &[f64]| -> f64 { m[split..].iter().sum() };
    let mut u = Vec::with_capacity(horizon + 1);
    u.push(on_y(&mass));
    for _ in 0..horizon {
        mass = op.push_mass(&mass);
        u.push(on_y(&mass));
    }
    Ok(RenewalSeq {
        u,
        method: Method::Operator,
        stderr: None,
        samples: None,
    })
}

/// Monte-Carlo estimate from `samples` uniform starting points in `Y`.
pub fn un_montecarlo(map: &MapSpec, horizon: usize, samples: u64, seed: u64) -> Result<RenewalSeq> {
    if samples < 1_000 {
        return Err(Error::InvalidParameter(format!("need at least 1000 samples, got {samples}")));
    }
    let hits = (0..samples)
        .into_par_iter()
        .fold(
            || vec![0u64; horizon + 1],
            |mut acc, s| {
                let mut rng = StreamRng::new(seed, RENEWAL_STREAM, s);
                let mut y = Y_LO + 0.5 * rng.uniform();
                acc[0] += 1;
                for slot in acc.iter_mut().skip(1) {
                    y = map.step(y);
                    if y >= Y_LO {
                        *slot += 1;
                    }
                }
                acc
            },
        )
        .reduce(|| vec![0u64; horizon + 1], add_counts);
    let n = samples as f64;
    let u = hits.iter().map(|&h| Y_MEASURE * h as f64 / n).collect();
    let stderr = hits
        .iter()
        .map(|&h| {
            let p = h as f64 / n;
            Y_MEASURE * (p * (1.0 - p) / n).sqrt()
        })
        .collect();
    Ok(RenewalSeq {
        u,
        method: Method::MonteCarlo,
        stderr: Some(stderr),
        samples: Some(samples),
    })
}

fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

/// Least-squares slope of `log u_n` against `log n` over `window`.
pub fn tail_exponent_fit(seq: &RenewalSeq, window: (usize, usize)) -> Result<LineFit> {
    loglog_fit(&seq.u, window.0, window.1)
}

/// Cross-validation of two estimates: entries with `n <= n_max` whose
/// difference exceeds `k` standard errors of the Monte-Carlo sequence.
#[derive(Debug, Clone, Serialize)]
pub struct Agreement {
    pub compared: usize,
    pub violations: usize,
    pub max_z: f64,
    pub worst_n: usize,
}

pub fn agreement(operator: &RenewalSeq, mc: &RenewalSeq, n_max: usize, k: f64) -> Result<Agreement> {
    let stderr = mc
        .stderr
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("second sequence carries no standard errors".into()))?;
    let top = n_max.min(operator.horizon()).min(mc.horizon());
    let (mut violations, mut max_z, mut worst_n) = (0, 0.0f64, 0);
    for n in 0..=top {
        let diff = (operator.u[n] - mc.u[n]).abs();
        let z = if stderr[n] > 0.0 {
            diff / stderr[n]
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if z > k {
            violations += 1;
        }
        if z > max_z {
            max_z = z;
            worst_n = n;
        }
    }
    Ok(Agreement {
        compared: top + 1,
        violations,
        max_z,
        worst_n,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservativityReport {
    pub d: u32,
    /// `d / (d - 1)`; infinite for `d = 1`.
    pub alpha_star: f64,
    /// `(k, S_k)` at logarithmically spaced `k`, with `S_k = Σ_{n <= k} u_n^d`.
    pub partial_sums: Vec<(usize, f64)>,
    pub last_decade_increment: f64,
    /// Fitted exponent of `u_n^d` over the last two decades.
    pub exponent: f64,
    /// `S_N` plus the power-law remainder; infinite when `exponent >= -1`.
    pub extrapolated_limit: f64,
    /// Relative change of the extrapolated limit between `N/10` and `N`.
    pub extrapolated_increment: f64,
    /// Share of the extrapolated limit not yet observed in `S_N`.
    pub remainder_fraction: f64,
    pub verdict: Verdict,
}

/// Evidence on whether `Σ u_n^d` converges.
///
/// The remainder after `k` is extrapolated from the fitted exponent `q` of
/// `u_n^d` as `k u_k^d / (-q - 1)`. The series is called convergent when
/// `q < -1`, the extrapolated limit moves by less than 0.5% between `N/10`
/// and `N`, and the remainder is at most half of that limit; otherwise
/// divergent when the raw partial sums still grew by more than 5% over the
/// last decade.
pub fn conservativity_index(seq: &RenewalSeq, d: u32) -> Result<ConservativityReport> {
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    let horizon = seq.horizon();
    if horizon < 100 {
        return Err(Error::InvalidParameter(format!("horizon {horizon} too short for a decade test")));
    }
    let powered: Vec<f64> = seq.u.iter().map(|u| u.powi(d as i32)).collect();
    let mut partial = Vec::with_capacity(powered.len());
    let mut acc = 0.0;
    for v in &powered {
        acc += v;
        partial.push(acc);
    }
    let increment = last_decade_increment(&partial);
    let exponent = loglog_fit(&powered, horizon / 100, horizon)?.slope;

    let limit_at = |k: usize| -> f64 {
        if exponent < -1.0 {
            partial[k] + k as f64 * powered[k] / (-exponent - 1.0)
        } else {
            f64::INFINITY
        }
    };
    let limit = limit_at(horizon);
    let earlier = limit_at((horizon / 10).max(1));
    let extrapolated_increment = if limit.is_finite() {
        (limit - earlier).abs() / limit
    } else {
        f64::INFINITY
    };
    let remainder_fraction = if limit.is_finite() { 1.0 - partial[horizon] / limit } else { 1.0 };
    let verdict = if extrapolated_increment < CONVERGENT_INCREMENT && remainder_fraction <= MAX_REMAINDER_FRACTION {
        Verdict::Convergent
    } else if increment > DIVERGENT_INCREMENT {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    Ok(ConservativityReport {
        d,
        alpha_star: if d == 1 { f64::INFINITY } else { d as f64 / (d as f64 - 1.0) },
        partial_sums: log_spaced(horizon).into_iter().map(|k| (k, partial[k])).collect(),
        last_decade_increment: increment,
        exponent,
        extrapolated_limit: limit,
        extrapolated_increment,
        remainder_fraction,
        verdict,
    })
}

/// 1, 2, 5, 10, 20, 50, ... up to and including `n`.
pub fn log_spaced(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut decade = 1usize;
    'outer: loop {
        for m in [1, 2, 5] {
            let k = m * decade;
            if k >= n {
                break 'outer;
            }
            out.push(k);
        }
        decade *= 10;
    }
    out.push(n);
    out
}

/// Visits of uniformly drawn tuples in `Y^d` to `Y^d` under the product map.
#[derive(Debug, Clone, Serialize)]
pub struct SimultaneousReturns {
    pub d: u32,
    pub horizon: usize,
    /// Per tuple: number of `n` in `1..=horizon` with every coordinate in `Y`.
    pub counts: Vec<u64>,
    /// Per step `n = 0..=horizon`: number of tuples with every coordinate in `Y`.
    pub hits_by_step: Vec<u64>,
    pub mean: f64,
    pub median: f64,
}

impl SimultaneousReturns {
    /// Fraction of tuples entirely in `Y` at step `n`, with its binomial
    /// standard error.
    pub fn frequency(&self, n: usize) -> (f64, f64) {
        let m = self.counts.len() as f64;
        let p = self.hits_by_step[n] as f64 / m;
        (p, (p * (1.0 - p) / m).sqrt())
    }
}

/// Counts simultaneous returns of `samples` tuples drawn uniformly from `Y^d`.
///
/// Since the coordinates are independent, `Leb_d{y in Y^d : T_d^n y in Y^d}
/// = u_n^d`, and tuples drawn uniformly from `Y^d` (mass `(1/2)^d`) satisfy
/// `E[count] = Σ_{n=1}^{N} u_n^d / (1/2)^d = Σ (2 u_n)^d`; see
/// [`expected_simultaneous_count`].
pub fn simultaneous_return_count(
    map: &MapSpec,
    d: u32,
    horizon: usize,
    samples: u64,
    seed: u64,
) -> Result<SimultaneousReturns> {
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    if samples < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 samples, got {samples}")));
    }
    let d_us = d as usize;
    let per_tuple: Vec<(u64, Vec<u32>)> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = StreamRng::new(seed, SIMULTANEOUS_STREAM, s);
            let mut pts: Vec<f64> = (0..d_us).map(|_| Y_LO + 0.5 * rng.uniform()).collect();
            let mut steps = Vec::new();
            let mut count = 0u64;
            for n in 1..=horizon {
                let mut all_in = true;
                for p in pts.iter_mut() {
                    *p = map.step(*p);
                    all_in &= *p >= Y_LO;
                }
                if all_in {
                    count += 1;
                    steps.push(n as u32);
                }
            }
            (count, steps)
        })
        .collect();
    let mut hits_by_step = vec![0u64; horizon + 1];
    hits_by_step[0] = samples;
    let mut counts = Vec::with_capacity(per_tuple.len());
    for (c, steps) in per_tuple {
        counts.push(c);
        for n in steps {
            hits_by_step[n as usize] += 1;
        }
    }
    let mean = counts.iter().sum::<u64>() as f64 / samples as f64;
    let mut sorted = counts.clone();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid]) as f64
    } else {
        sorted[mid] as f64
    };
    Ok(SimultaneousReturns {
        d,
        horizon,
        counts,
        hits_by_step,
        mean,
        median,
    })
}

/// `Σ_{n=1}^{horizon} (2 u_n)^d`, the mean simultaneous-return count of tuples
/// drawn uniformly from `Y^d`.
pub fn expected_simultaneous_count(seq: &RenewalSeq, d: u32, horizon: usize) -> f64 {
    seq.u[1..=horizon.min(seq.horizon())]
        .iter()
        .map(|u| (u / Y_MEASURE).powi(d as i32))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::{build_ulam, Mesh};

    fn operator(alpha: f64, cells: usize) -> UlamOperator {
        let m = MapSpec::manpom(alpha).unwrap();
        build_ulam(&m, &Mesh::for_manpom(&m, cells, None).unwrap()).unwrap()
    }

    #[test]
    fn first_terms_are_exact() {
        for alpha in [0.5, 1.0, 2.0, 4.0] {
            let seq = un_operator(&operator(alpha, 1024), 3).unwrap();
            assert_eq!(seq.u[0], 0.5);
            assert!((seq.u[1] - 0.25).abs() < 1e-14, "{}", seq.u[1]);
            assert!(seq.u.iter().all(|&u| (0.0..=0.5).contains(&u)));
        }
    }

    #[test]
    fn misaligned_mesh_is_rejected() {
        let m = MapSpec::manpom(2.0).unwrap();
        let op = build_ulam(&m, &Mesh::uniform(3).unwrap()).unwrap();
        assert_eq!(un_operator(&op, 5).unwrap_err(), Error::MeshMisaligned { point: 0.5 });
    }

    #[test]
    fn montecarlo_first_terms() {
        let m = MapSpec::manpom(2.0).unwrap();
        let samples = 100_000;
        let seq = un_montecarlo(&m, 5, samples, 11).unwrap();
        assert_eq!(seq.u[0], 0.5);
        let sigma = 0.5 * (0.25f64 * 0.75 / samples as f64).sqrt();
        assert!((seq.u[1] - 0.25).abs() < 3.0 * sigma);
        assert!(un_montecarlo(&m, 5, 10, 11).is_err());
    }

    #[test]
    fn operator_and_montecarlo_agree() {
        let op = operator(2.0, 1 << 13);
        let exact = un_operator(&op, 200).unwrap();
        let mc = un_montecarlo(op.map(), 200, 200_000, 3).unwrap();
        let a = agreement(&exact, &mc, 200, 4.0).unwrap();
        assert_eq!(a.violations, 0, "{a:?}");
    }

    #[test]
    fn exponent_for_alpha_two() {
        let seq = un_operator(&operator(2.0, 1 << 13), 5_000).unwrap();
        let fit = tail_exponent_fit(&seq, (100, 5_000)).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn acip_case_tends_to_constant() {
        let seq = un_operator(&operator(0.5, 1 << 12), 2_000).unwrap();
        let fit = tail_exponent_fit(&seq, (100, 2_000)).unwrap();
        assert!(fit.slope.abs() < 0.02, "{fit:?}");
    }

    fn power_law(c: f64, p: f64, n: usize) -> RenewalSeq {
        let mut u: Vec<f64> = (0..=n).map(|k| c * (k.max(1) as f64).powf(p)).collect();
        u[0] = 0.5;
        RenewalSeq {
            u,
            method: Method::Operator,
            stderr: None,
            samples: None,
        }
    }

    #[test]
    fn verdicts_on_synthetic_power_laws() {
        // u_n = 0.3 n^(-2/3): Σ u^2 converges, Σ u diverges.
        let seq = power_law(0.3, -2.0 / 3.0, 10_000);
        assert_eq!(conservativity_index(&seq, 2).unwrap().verdict, Verdict::Convergent);
        assert_eq!(conservativity_index(&seq, 1).unwrap().verdict, Verdict::Divergent);
        // Borderline u_n^2 ~ 1/n must not be called convergent.
        let seq = power_law(0.3, -0.5, 10_000);
        assert_ne!(conservativity_index(&seq, 2).unwrap().verdict, Verdict::Convergent);
        // u_n = 0.3 n^(-1/3): Σ u^2 diverges.
        let seq = power_law(0.3, -1.0 / 3.0, 10_000);
        let r = conservativity_index(&seq, 2).unwrap();
        assert_eq!(r.verdict, Verdict::Divergent);
        assert_eq!(r.alpha_star, 2.0);
        assert!(r.partial_sums.windows(2).all(|w| w[1].1 >= w[0].1));
        assert_eq!(r.partial_sums.last().unwrap().0, 10_000);
    }

    #[test]
    fn log_spacing() {
        assert_eq!(log_spaced(100), vec![1, 2, 5, 10, 20, 50, 100]);
        assert_eq!(log_spaced(30), vec![1, 2, 5, 10, 20, 30]);
    }

    #[test]
    fn simultaneous_returns_match_product_structure() {
        let op = operator(2.0, 1 << 12);
        let seq = un_operator(&op, 50).unwrap();
        let sim = simultaneous_return_count(op.map(), 2, 50, 100_000, 4).unwrap();
        for n in [1, 2, 5, 20, 50] {
            let (p, se) = sim.frequency(n);
            let expected = (seq.u[n] / Y_MEASURE).powi(2);
            assert!((p - expected).abs() < 4.0 * se, "n={n}: {p} vs {expected}");
        }
        let expected = expected_simultaneous_count(&seq, 2, 50);
        let se = (sim.counts.iter().map(|&c| (c as f64 - sim.mean).powi(2)).sum::<f64>()
            / (sim.counts.len() as f64 - 1.0)
            / sim.counts.len() as f64)
            .sqrt();
        assert!((sim.mean - expected).abs() < 4.0 * se, "{} vs {expected}", sim.mean);
    }
}
