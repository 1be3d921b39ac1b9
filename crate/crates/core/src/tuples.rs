//! Finite-horizon statistics of d-tuples under the product map
//! `T_d(x_1, ..., x_d) = (T x_1, ..., T x_d)`.
//!
//! Proximality and separation are asymptotic properties. Here they are
//! replaced by running extrema over steps `n` in `(burn_in, N]`: a tuple is
//! proximal at horizon `N` if the largest pairwise distance dropped below
//! `eps_prox` at some step, and `delta`-separated if the smallest pairwise
//! distance exceeded `delta` at some step. Both flags can only switch on as
//! `N` grows.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{wilson_interval, Z95};
use crate::inducing::Y_LO;
use crate::maps::{MapKind, MapSpec};
use crate::rng::StreamRng;

pub const DEFAULT_EPS_PROX: f64 = 1e-3;
/// Pairs closer than this are treated as eventually identified and resampled.
pub const COINCIDENT: f64 = 1e-15;
/// Relative slack allowed in the expansion test `ρ' >= ρ (1 - slack)`.
pub const EXPANSION_SLACK: f64 = 1e-12;

const EXPANSIVITY_STREAM: u64 = 0x6578_7061;
const BOX_STREAM: u64 = 0x626f_7868;

/// Default separation threshold: 1/3 for pairs, `min(1/3, 0.8 / (2(d-2)))`
/// for `d >= 3`.
pub fn default_delta(d: usize) -> f64 {
    if d <= 2 {
        1.0 / 3.0
    } else {
        (1.0f64 / 3.0).min(0.8 / (2.0 * (d as f64 - 2.0)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TupleConfig {
    pub map: MapSpec,
    pub d: usize,
    pub horizon: usize,
    pub delta: f64,
    pub eps_prox: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl TupleConfig {
    pub fn new(map: MapSpec, d: usize, horizon: usize) -> Self {
        Self {
            map,
            d,
            horizon,
            delta: default_delta(d),
            eps_prox: DEFAULT_EPS_PROX,
            burn_in: 0,
            seed: 0,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_eps_prox(mut self, eps: f64) -> Self {
        self.eps_prox = eps;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidParameter(format!("d must be at least 2, got {}", self.d)));
        }
        if !(self.eps_prox > 0.0 && self.eps_prox < self.delta && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < eps_prox < delta < 1, got eps_prox={} delta={}",
                self.eps_prox, self.delta
            )));
        }
        if self.horizon <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "horizon {} must exceed burn-in {}",
                self.horizon, self.burn_in
            )));
        }
        Ok(())
    }
}

/// Running extrema of the pairwise distances along one orbit of `T_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TupleStats {
    pub horizon: usize,
    /// `min_n max_{i<j} ρ(T^n x_i, T^n x_j)`.
    pub min_over_n_of_maxpair: f64,
    /// `max_n min_{i<j} ρ(T^n x_i, T^n x_j)`.
    pub max_over_n_of_minpair: f64,
    /// First step with max pairwise distance below `eps_prox`.
    pub first_prox_time: Option<usize>,
    /// First step with min pairwise distance above `delta`.
    pub first_sep_time: Option<usize>,
    /// Largest min pairwise distance over `n` in `[N/2, N]`.
    pub late_window_max_minpair: f64,
    /// Largest max pairwise distance over `n` in `[N/2, N]`.
    pub late_window_max_maxpair: f64,
    /// Steps with every coordinate in `Y = [1/2, 1]`.
    pub simultaneous_y_count: u64,
}

impl TupleStats {
    fn empty(horizon: usize) -> Self {
        Self {
            horizon,
            min_over_n_of_maxpair: f64::INFINITY,
            max_over_n_of_minpair: 0.0,
            first_prox_time: None,
            first_sep_time: None,
            late_window_max_minpair: 0.0,
            late_window_max_maxpair: 0.0,
            simultaneous_y_count: 0,
        }
    }
}

/// Statistics of the orbit of `x` at horizon `cfg.horizon`.
pub fn simulate_tuple(cfg: &TupleConfig, x: &[f64]) -> Result<TupleStats> {
    Ok(simulate_tuple_at(cfg, x, &[cfg.horizon])?.remove(0))
}

/// Statistics at each horizon in `horizons` (ascending), from a single pass.
pub fn simulate_tuple_at(cfg: &TupleConfig, x: &[f64], horizons: &[usize]) -> Result<Vec<TupleStats>> {
    cfg.validate()?;
    if x.len() != cfg.d {
        return Err(Error::InvalidParameter(format!("expected {} coordinates, got {}", cfg.d, x.len())));
    }
    if let Some(&bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain { x: bad });
    }
    check_horizons(horizons, cfg.burn_in)?;
    Ok(run_orbit(cfg, x, horizons))
}

fn check_horizons(horizons: &[usize], burn_in: usize) -> Result<()> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[1] <= w[0]) || horizons[0] <= burn_in {
        return Err(Error::InvalidParameter(format!(
            "horizons must be strictly increasing and exceed the burn-in {burn_in}: {horizons:?}"
        )));
    }
    Ok(())
}

fn run_orbit(cfg: &TupleConfig, x: &[f64], horizons: &[usize]) -> Vec<TupleStats> {
    let map = &cfg.map;
    let last = *horizons.last().unwrap();
    let mut pts = x.to_vec();
    let mut running = TupleStats::empty(last);
    let mut late: Vec<(f64, f64)> = vec![(0.0, 0.0); horizons.len()];
    let mut out = Vec::with_capacity(horizons.len());
    let mut next = 0;
    for n in 1..=last {
        let mut all_in_y = true;
        for p in pts.iter_mut() {
            *p = map.step(*p);
            all_in_y &= *p >= Y_LO;
        }
        if n <= cfg.burn_in {
            continue;
        }
        let (mut minpair, mut maxpair) = (f64::INFINITY, 0.0f64);
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let r = map.dist(pts[i], pts[j]);
                minpair = minpair.min(r);
                maxpair = maxpair.max(r);
            }
        }
        if maxpair < running.min_over_n_of_maxpair {
            running.min_over_n_of_maxpair = maxpair;
        }
        if minpair > running.max_over_n_of_minpair {
            running.max_over_n_of_minpair = minpair;
        }
        if running.first_prox_time.is_none() && maxpair < cfg.eps_prox {
            running.first_prox_time = Some(n);
        }
        if running.first_sep_time.is_none() && minpair > cfg.delta {
            running.first_sep_time = Some(n);
        }
        if all_in_y {
            running.simultaneous_y_count += 1;
        }
        for (k, &h) in horizons.iter().enumerate().skip(next) {
            if n >= h / 2 {
                late[k].0 = late[k].0.max(minpair);
                late[k].1 = late[k].1.max(maxpair);
            }
        }
        if n == horizons[next] {
            out.push(TupleStats {
                horizon: n,
                late_window_max_minpair: late[next].0,
                late_window_max_maxpair: late[next].1,
                ..running
            });
            next += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Flags {
    pub proximal: bool,
    pub separated: bool,
    pub li_yorke: bool,
    pub asymptotic_proxy: bool,
}

/// Flags at the horizon of `stats`.
///
/// `asymptotic_proxy` asks for contraction over the late window (both the
/// min and max pairwise distances stay below `eps_prox`) and for the tuple
/// never having been `delta`-separated, so a Li-Yorke tuple is never also
/// flagged asymptotic.
pub fn classify(stats: &TupleStats, delta: f64, eps_prox: f64) -> Flags {
    let proximal = stats.min_over_n_of_maxpair < eps_prox;
    let separated = stats.max_over_n_of_minpair > delta;
    Flags {
        proximal,
        separated,
        li_yorke: proximal && separated,
        asymptotic_proxy: stats.late_window_max_minpair < eps_prox
            && stats.late_window_max_maxpair < eps_prox
            && !separated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fraction {
    pub count: u64,
    pub trials: u64,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Fraction {
    pub fn new(count: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(count, trials, Z95);
        Self {
            count,
            trials,
            value: if trials == 0 { 0.0 } else { count as f64 / trials as f64 },
            lo,
            hi,
        }
    }
}

/// Analytic expectation for a `(map, d)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    /// Almost every tuple is Li-Yorke.
    LyFull,
    /// Almost every tuple is not separated, hence not Li-Yorke.
    NotLy,
    /// `alpha = (d-1)/(d-2)`: a logarithmic divergence, undecidable at desk scale.
    Critical,
    Unknown,
}

pub fn predict(map: &MapSpec, d: usize) -> Prediction {
    match map.kind() {
        MapKind::Doubling => Prediction::LyFull,
        MapKind::ManPom { alpha } => {
            if d <= 2 {
                return Prediction::LyFull;
            }
            let threshold = (d as f64 - 1.0) / (d as f64 - 2.0);
            if (alpha - threshold).abs() < 1e-12 {
                Prediction::Critical
            } else if *alpha < threshold {
                Prediction::LyFull
            } else {
                Prediction::NotLy
            }
        }
        _ => Prediction::Unknown,
    }
}

/// One cell of a phase diagram.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseRow {
    pub map: String,
    pub alpha: Option<f64>,
    pub d: usize,
    pub delta: f64,
    pub eps_prox: f64,
    pub horizon: usize,
    pub samples: u64,
    pub proximal: Fraction,
    pub separated: Fraction,
    pub li_yorke: Fraction,
    pub asymptotic_proxy: Fraction,
    /// Tuples whose late-window min pairwise distance exceeds `delta`.
    pub late_separated: Fraction,
    pub prediction: Prediction,
}

fn sample_stats(cfg: &TupleConfig, samples: u64, horizons: &[usize], row: u64) -> Vec<Vec<TupleStats>> {
    (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = StreamRng::new(cfg.seed, row, s);
            let x: Vec<f64> = (0..cfg.d).map(|_| rng.uniform()).collect();
            run_orbit(cfg, &x, horizons)
        })
        .collect()
}

fn summarise(cfg: &TupleConfig, stats: &[TupleStats], horizon: usize) -> PhaseRow {
    let samples = stats.len() as u64;
    let mut counts = [0u64; 5];
    for s in stats {
        let f = classify(s, cfg.delta, cfg.eps_prox);
        counts[0] += f.proximal as u64;
        counts[1] += f.separated as u64;
        counts[2] += f.li_yorke as u64;
        counts[3] += f.asymptotic_proxy as u64;
        counts[4] += (s.late_window_max_minpair > cfg.delta) as u64;
    }
    PhaseRow {
        map: map_name(&cfg.map).to_string(),
        alpha: cfg.map.alpha(),
        d: cfg.d,
        delta: cfg.delta,
        eps_prox: cfg.eps_prox,
        horizon,
        samples,
        proximal: Fraction::new(counts[0], samples),
        separated: Fraction::new(counts[1], samples),
        li_yorke: Fraction::new(counts[2], samples),
        asymptotic_proxy: Fraction::new(counts[3], samples),
        late_separated: Fraction::new(counts[4], samples),
        prediction: predict(&cfg.map, cfg.d),
    }
}

pub fn map_name(map: &MapSpec) -> &'static str {
    match map.kind() {
        MapKind::ManPom { .. } => "manpom",
        MapKind::ManPomTwo { .. } => "manpom2",
        MapKind::Doubling => "doubling",
        MapKind::Custom { .. } => "custom",
    }
}

/// Fractions of `samples` tuples drawn uniformly from `[0,1]^d` that are
/// proximal, separated, Li-Yorke and asymptotic at horizon `cfg.horizon`.
pub fn measure_estimate(cfg: &TupleConfig, samples: u64) -> Result<PhaseRow> {
    Ok(measure_at_horizons(cfg, samples, &[cfg.horizon], 0)?.remove(0))
}

/// As [`measure_estimate`] at several horizons from one pass per tuple.
/// Sample `s` draws its starting point from stream `(cfg.seed, row, s)`.
pub fn measure_at_horizons(cfg: &TupleConfig, samples: u64, horizons: &[usize], row: u64) -> Result<Vec<PhaseRow>> {
    cfg.validate()?;
    check_horizons(horizons, cfg.burn_in)?;
    if samples < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 samples, got {samples}")));
    }
    let per_sample = sample_stats(cfg, samples, horizons, row);
    Ok(horizons
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            let column: Vec<TupleStats> = per_sample.iter().map(|v| v[k]).collect();
            summarise(cfg, &column, h)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum DeltaRule {
    /// [`default_delta`].
    Default,
    Fixed(f64),
}

impl DeltaRule {
    pub fn delta(&self, d: usize) -> f64 {
        match *self {
            DeltaRule::Default => default_delta(d),
            DeltaRule::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseDiagram {
    pub rows: Vec<PhaseRow>,
}

/// Grid of [`measure_estimate`] rows for Manneville-Pomeau maps; row `k`
/// (alpha-major) uses random stream row `k`.
pub fn phase_sweep(
    alphas: &[f64],
    ds: &[usize],
    delta_rule: DeltaRule,
    horizon: usize,
    samples: u64,
    seed: u64,
) -> Result<PhaseDiagram> {
    if alphas.is_empty() || ds.is_empty() {
        return Err(Error::InvalidParameter("sweep grids must be nonempty".into()));
    }
    let mut rows = Vec::with_capacity(alphas.len() * ds.len());
    for (a, &alpha) in alphas.iter().enumerate() {
        for (k, &d) in ds.iter().enumerate() {
            let cfg = TupleConfig::new(MapSpec::manpom(alpha)?, d, horizon)
                .with_delta(delta_rule.delta(d))
                .with_seed(seed);
            let row = (a * ds.len() + k) as u64;
            rows.push(measure_at_horizons(&cfg, samples, &[horizon], row)?.remove(0));
        }
    }
    Ok(PhaseDiagram { rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansivityReport {
    pub trials: u64,
    /// Pairs with `ρ' < ρ (1 - 1e-12)`.
    pub violations: u64,
    /// Pairs with `ρ' <= ρ`.
    pub strict_failures: u64,
    pub min_ratio: f64,
    /// Pair attaining `min_ratio`.
    pub worst_pair: (f64, f64),
    /// Draws rejected because `|x - y| < 1e-15`.
    pub excluded: u64,
}

/// Tests `ρ(Tx, Ty) > ρ(x, y)` on `trials` pairs drawn uniformly from the
/// region `ρ(x, y) <= 1/3`.
pub fn expansivity_check(map: &MapSpec, trials: u64, seed: u64) -> Result<ExpansivityReport> {
    if !matches!(map.kind(), MapKind::ManPom { .. }) {
        return Err(Error::InvalidParameter(format!("expected a Manneville-Pomeau map, got {map}")));
    }
    let results: Vec<(f64, f64, f64, u64)> = (0..trials)
        .into_par_iter()
        .map(|s| {
            let mut rng = StreamRng::new(seed, EXPANSIVITY_STREAM, s);
            let mut excluded = 0;
            loop {
                let (x, y) = (rng.uniform(), rng.uniform());
                if (x - y).abs() < COINCIDENT {
                    excluded += 1;
                    continue;
                }
                let r = map.dist(x, y);
                if r > 1.0 / 3.0 {
                    continue;
                }
                return (x, y, map.dist(map.step(x), map.step(y)) / r, excluded);
            }
        })
        .collect();
    let mut report = ExpansivityReport {
        trials,
        violations: 0,
        strict_failures: 0,
        min_ratio: f64::INFINITY,
        worst_pair: (f64::NAN, f64::NAN),
        excluded: 0,
    };
    for (x, y, ratio, excluded) in results {
        report.excluded += excluded;
        if ratio < 1.0 - EXPANSION_SLACK {
            report.violations += 1;
        }
        if ratio <= 1.0 {
            report.strict_failures += 1;
        }
        if ratio < report.min_ratio {
            report.min_ratio = ratio;
            report.worst_pair = (x, y);
        }
    }
    Ok(report)
}

/// The box `Π_i [1/2 + (i-1)/(2(d-2)), 1/2 + (i-1)/(2(d-2)) + η]`,
/// `i = 1..d-1`, with the last factor taken as `[1 - η, 1]`.
pub fn separation_box(d: usize, eta: f64) -> Result<Vec<(f64, f64)>> {
    if d < 3 {
        return Err(Error::InvalidParameter(format!("separation box needs d >= 3, got {d}")));
    }
    let spacing = 1.0 / (2.0 * (d as f64 - 2.0));
    if !(eta > 0.0) || eta >= 0.5 * spacing {
        return Err(Error::BoxOverflow(format!(
            "eta = {eta} must lie in (0, 1/(4(d-2))) = (0, {})",
            0.5 * spacing
        )));
    }
    let mut out: Vec<(f64, f64)> = (0..d - 2)
        .map(|i| {
            let lo = Y_LO + i as f64 * spacing;
            (lo, lo + eta)
        })
        .collect();
    out.push((1.0 - eta, 1.0));
    if let Some(&(lo, hi)) = out.iter().find(|(lo, hi)| *lo < Y_LO || *hi > 1.0) {
        return Err(Error::BoxOverflow(format!("[{lo}, {hi}]")));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxHitReport {
    pub d: usize,
    pub eta: f64,
    pub horizon: usize,
    pub boxes: Vec<(f64, f64)>,
    /// `η^(d-1)`.
    pub box_measure: f64,
    /// Per sample: first `n` in `1..=horizon` with the orbit in the box.
    pub first_hit: Vec<Option<usize>>,
    pub hits: Fraction,
}

impl BoxHitReport {
    /// Hit fraction restricted to the first `n` steps.
    pub fn fraction_by(&self, n: usize) -> Fraction {
        let count = self.first_hit.iter().filter(|t| matches!(t, Some(k) if *k <= n)).count();
        Fraction::new(count as u64, self.first_hit.len() as u64)
    }
}

/// Fraction of `(d-1)`-tuples drawn uniformly from `Y^(d-1)` whose orbit
/// enters [`separation_box`] within `horizon` steps.
pub fn separation_box_hit(
    map: &MapSpec,
    d: usize,
    eta: f64,
    horizon: usize,
    samples: u64,
    seed: u64,
) -> Result<BoxHitReport> {
    let boxes = separation_box(d, eta)?;
    let first_hit: Vec<Option<usize>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = StreamRng::new(seed, BOX_STREAM, s);
            let mut pts: Vec<f64> = (0..d - 1).map(|_| Y_LO + 0.5 * rng.uniform()).collect();
            for n in 1..=horizon {
                let mut inside = true;
                for (p, &(lo, hi)) in pts.iter_mut().zip(&boxes) {
                    *p = map.step(*p);
                    inside &= *p >= lo && *p <= hi;
                }
                if inside {
                    return Some(n);
                }
            }
            None
        })
        .collect();
    let count = first_hit.iter().filter(|t| t.is_some()).count() as u64;
    Ok(BoxHitReport {
        d,
        eta,
        horizon,
        box_measure: eta.powi(d as i32 - 1),
        hits: Fraction::new(count, samples),
        boxes,
        first_hit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(alpha: f64, d: usize, n: usize) -> TupleConfig {
        TupleConfig::new(MapSpec::manpom(alpha).unwrap(), d, n)
    }

    /// Independent reimplementation: store every orbit, then scan.
    fn oracle(map: &MapSpec, x: &[f64], n: usize, delta: f64, eps: f64) -> TupleStats {
        let orbits: Vec<Vec<f64>> = x.iter().map(|&p| map.orbit(p).take(n + 1).collect()).collect();
        let mut minpairs = Vec::new();
        let mut maxpairs = Vec::new();
        for k in 1..=n {
            let mut dists = Vec::new();
            for i in 0..x.len() {
                for j in i + 1..x.len() {
                    dists.push(map.dist(orbits[i][k], orbits[j][k]));
                }
            }
            minpairs.push(dists.iter().cloned().fold(f64::INFINITY, f64::min));
            maxpairs.push(dists.iter().cloned().fold(0.0, f64::max));
        }
        let late = n / 2;
        TupleStats {
            horizon: n,
            min_over_n_of_maxpair: maxpairs.iter().cloned().fold(f64::INFINITY, f64::min),
            max_over_n_of_minpair: minpairs.iter().cloned().fold(0.0, f64::max),
            first_prox_time: maxpairs.iter().position(|&v| v < eps).map(|k| k + 1),
            first_sep_time: minpairs.iter().position(|&v| v > delta).map(|k| k + 1),
            late_window_max_minpair: minpairs[late.max(1) - 1..].iter().cloned().fold(0.0, f64::max),
            late_window_max_maxpair: maxpairs[late.max(1) - 1..].iter().cloned().fold(0.0, f64::max),
            simultaneous_y_count: (1..=n).filter(|&k| orbits.iter().all(|o| o[k] >= 0.5)).count() as u64,
        }
    }

    #[test]
    fn matches_independent_oracle_bitwise() {
        let c = cfg(1.0, 3, 1000);
        let x = [0.51, 0.61, 0.71];
        let got = simulate_tuple(&c, &x).unwrap();
        assert_eq!(got, oracle(&c.map, &x, 1000, c.delta, c.eps_prox));
        let c = cfg(2.5, 2, 777).with_delta(0.3);
        let x = [0.123, 0.8];
        assert_eq!(simulate_tuple(&c, &x).unwrap(), oracle(&c.map, &x, 777, 0.3, c.eps_prox));
    }

    #[test]
    fn diagonal_tuple() {
        let c = cfg(2.0, 2, 500);
        let s = simulate_tuple(&c, &[0.3, 0.3]).unwrap();
        assert_eq!(s.min_over_n_of_maxpair, 0.0);
        assert_eq!(s.max_over_n_of_minpair, 0.0);
        let f = classify(&s, c.delta, c.eps_prox);
        assert!(f.proximal && !f.separated && !f.li_yorke);
        // Two equal coordinates among three: min pair is always zero.
        let s = simulate_tuple(&cfg(2.0, 3, 500), &[0.3, 0.7, 0.3]).unwrap();
        assert_eq!(s.max_over_n_of_minpair, 0.0);
    }

    #[test]
    fn doubling_pair_collapses() {
        let c = TupleConfig::new(MapSpec::doubling(), 2, 10);
        let s = simulate_tuple(&c, &[0.0, 0.5]).unwrap();
        assert_eq!(s.first_prox_time, Some(1));
        let f = classify(&s, c.delta, c.eps_prox);
        assert!(f.asymptotic_proxy && f.proximal && !f.separated);
    }

    #[test]
    fn classify_definitions() {
        let mut s = TupleStats::empty(10);
        s.max_over_n_of_minpair = 0.4;
        s.min_over_n_of_maxpair = 0.5;
        assert!(classify(&s, 0.2, 1e-3).separated);
        // Separated early and contracting late: Li-Yorke, never asymptotic.
        s.min_over_n_of_maxpair = 1e-4;
        s.late_window_max_maxpair = 1e-4;
        s.late_window_max_minpair = 1e-5;
        let f = classify(&s, 0.2, 1e-3);
        assert!(f.li_yorke && !f.asymptotic_proxy);
    }

    #[test]
    fn checkpoints_agree_with_separate_runs() {
        let c = cfg(1.5, 3, 4000).with_delta(0.2);
        let x = [0.05, 0.4, 0.9];
        let at = simulate_tuple_at(&c, &x, &[1000, 2500, 4000]).unwrap();
        for s in &at {
            let single = TupleConfig { horizon: s.horizon, ..c.clone() };
            assert_eq!(*s, simulate_tuple(&single, &x).unwrap());
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(2.0, 1, 10).validate().is_err());
        assert!(cfg(2.0, 2, 10).with_eps_prox(0.5).validate().is_err());
        assert!(cfg(2.0, 2, 10).with_burn_in(10).validate().is_err());
        assert!(simulate_tuple(&cfg(2.0, 2, 10), &[0.1, 1.5]).is_err());
        assert!(simulate_tuple(&cfg(2.0, 2, 10), &[0.1]).is_err());
        assert_eq!(default_delta(2), 1.0 / 3.0);
        assert_eq!(default_delta(3), 1.0 / 3.0);
        assert!((default_delta(4) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn expansion_examples() {
        let m = MapSpec::manpom(1.0).unwrap();
        let r = m.dist(m.step(0.1), m.step(0.3));
        assert!((r - 0.36).abs() < 1e-15);
        let r = m.dist(m.step(0.49), m.step(0.51));
        assert!((r - 0.9502).abs() < 1e-12);
        assert_eq!(m.dist(m.step(0.4), m.step(0.4)), 0.0);
    }

    #[test]
    fn same_branch_pairs_expand() {
        // Both branches have derivative > 1 away from 0, so pairs on one side
        // of 1/2 always move apart.
        let m = MapSpec::manpom(2.0).unwrap();
        let mut rng = StreamRng::new(1, 0, 0);
        for _ in 0..100_000 {
            let (x, y) = (rng.uniform(), rng.uniform());
            if (x < 0.5) != (y < 0.5) || (x - y).abs() < COINCIDENT {
                continue;
            }
            assert!(m.dist(m.step(x), m.step(y)) > m.dist(x, y), "{x} {y}");
        }
    }

    #[test]
    fn straddling_pairs_can_contract() {
        // x = 0.2, y = 0.5 at alpha = 1: ρ = 0.3 but ρ' = |0.28 - 0| = 0.28.
        let m = MapSpec::manpom(1.0).unwrap();
        assert!((m.dist(0.2, 0.5) - 0.3).abs() < 1e-15);
        assert!((m.dist(m.step(0.2), m.step(0.5)) - 0.28).abs() < 1e-15);
        let r = expansivity_check(&m, 10_000, 3).unwrap();
        assert!(r.violations > 0);
        assert!(r.min_ratio < 1.0);
        assert!(expansivity_check(&MapSpec::doubling(), 10, 3).is_err());
    }

    #[test]
    fn box_geometry() {
        let b = separation_box(3, 0.1).unwrap();
        assert_eq!(b, vec![(0.5, 0.6), (0.9, 1.0)]);
        let b = separation_box(4, 0.05).unwrap();
        assert_eq!(b.len(), 3);
        assert!((b[1].0 - 0.75).abs() < 1e-15);
        assert_eq!(b[2], (0.95, 1.0));
        assert!(matches!(separation_box(3, 0.3), Err(Error::BoxOverflow(_))));
        assert!(separation_box(2, 0.1).is_err());
    }

    #[test]
    fn box_hits_grow_with_horizon() {
        let m = MapSpec::manpom(1.2).unwrap();
        let r = separation_box_hit(&m, 3, 0.1, 20_000, 400, 8).unwrap();
        assert!((r.box_measure - 0.01).abs() < 1e-15);
        let early = r.fraction_by(2_000).value;
        assert!(r.hits.value >= early);
        assert!(r.hits.value > 0.3, "{:?}", r.hits);
    }

    #[test]
    fn predictions() {
        let p = |a: f64, d| predict(&MapSpec::manpom(a).unwrap(), d);
        assert_eq!(p(1.2, 3), Prediction::LyFull);
        // d = 3: Li-Yorke threshold (d-1)/(d-2) = 2.
        assert_eq!(p(1.7, 3), Prediction::LyFull);
        assert_eq!(p(2.0, 3), Prediction::Critical);
        assert_eq!(p(2.5, 3), Prediction::NotLy);
        assert_eq!(p(1.7, 2), Prediction::LyFull);
        // d = 4: threshold 3/2.
        assert_eq!(p(1.5, 4), Prediction::Critical);
        assert_eq!(p(1.7, 4), Prediction::NotLy);
        assert_eq!(predict(&MapSpec::doubling(), 4), Prediction::LyFull);
    }

    #[test]
    fn phase_rows_are_consistent() {
        let d = phase_sweep(&[1.2, 2.5], &[2, 3], DeltaRule::Default, 2_000, 200, 5).unwrap();
        assert_eq!(d.rows.len(), 4);
        for r in &d.rows {
            assert!(r.li_yorke.value <= r.proximal.value.min(r.separated.value));
            assert!(r.li_yorke.lo <= r.li_yorke.value && r.li_yorke.value <= r.li_yorke.hi);
        }
        let again = phase_sweep(&[1.2, 2.5], &[2, 3], DeltaRule::Default, 2_000, 200, 5).unwrap();
        for (a, b) in d.rows.iter().zip(&again.rows) {
            assert_eq!(a.li_yorke.count, b.li_yorke.count);
            assert_eq!(a.asymptotic_proxy.count, b.asymptotic_proxy.count);
        }
    }

    #[test]
    fn doubling_tuples_are_li_yorke() {
        for d in [2, 3, 4] {
            let c = TupleConfig::new(MapSpec::doubling(), d, 10_000).with_delta(0.1).with_seed(1);
            let r = measure_estimate(&c, 200).unwrap();
            assert!(r.li_yorke.value >= 0.95, "d={d}: {:?}", r.li_yorke);
        }
    }
}
