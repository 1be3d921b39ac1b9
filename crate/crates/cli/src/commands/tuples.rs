//! `tuples` and `sweep`: Li-Yorke statistics of random d-tuples.

use clap::Args;
use intermittent::tuples::{
    default_delta, expansivity_check, map_name, measure_at_horizons, phase_sweep, separation_box_hit, DeltaRule,
    Fraction, PhaseRow, TupleConfig,
};
use intermittent::Metric;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{build_map, counters, to_value, MapArgs};
use crate::config::{count, counts, parse_count, parse_usize};
use crate::error::CliError;
use crate::output::{num, opt_num, Csv, Output};

pub const COLUMNS: [&str; 25] = [
    "map",
    "alpha",
    "d",
    "delta",
    "eps_prox",
    "N",
    "samples",
    "frac_proximal",
    "frac_proximal_lo",
    "frac_proximal_hi",
    "frac_separated",
    "frac_separated_lo",
    "frac_separated_hi",
    "frac_ly",
    "frac_ly_lo",
    "frac_ly_hi",
    "frac_asymptotic_proxy",
    "frac_asymptotic_proxy_lo",
    "frac_asymptotic_proxy_hi",
    "frac_late_separated",
    "frac_late_separated_lo",
    "frac_late_separated_hi",
    "prediction",
    "ly_threshold",
    "conservative_threshold",
];

/// `(d-1)/(d-2)`; infinite for pairs.
pub fn ly_threshold(d: usize) -> f64 {
    if d <= 2 {
        f64::INFINITY
    } else {
        (d as f64 - 1.0) / (d as f64 - 2.0)
    }
}

/// `d/(d-1)`: the product map on `d` copies is conservative iff `alpha` is at most this.
pub fn conservative_threshold(d: usize) -> f64 {
    d as f64 / (d as f64 - 1.0)
}

pub fn phase_csv(rows: &[PhaseRow]) -> String {
    let mut csv = Csv::new(&COLUMNS);
    for r in rows {
        let mut cells = vec![
            r.map.clone(),
            opt_num(r.alpha),
            r.d.to_string(),
            num(r.delta),
            num(r.eps_prox),
            r.horizon.to_string(),
            r.samples.to_string(),
        ];
        for f in [&r.proximal, &r.separated, &r.li_yorke, &r.asymptotic_proxy, &r.late_separated] {
            cells.extend([num(f.value), num(f.lo), num(f.hi)]);
        }
        cells.push(to_value(&r.prediction).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
        let t = ly_threshold(r.d);
        cells.push(if t.is_finite() { num(t) } else { "inf".into() });
        cells.push(num(conservative_threshold(r.d)));
        csv.row(&cells);
    }
    csv.into_string()
}

fn fraction_json(f: &Fraction) -> Value {
    json!({ "value": f.value, "lo": f.lo, "hi": f.hi, "count": f.count })
}

fn rows_summary(rows: &[PhaseRow]) -> Value {
    rows.iter()
        .map(|r| {
            json!({
                "alpha": r.alpha,
                "d": r.d,
                "N": r.horizon,
                "frac_ly": fraction_json(&r.li_yorke),
                "frac_proximal": fraction_json(&r.proximal),
                "frac_separated": fraction_json(&r.separated),
                "frac_late_separated": fraction_json(&r.late_separated),
                "prediction": r.prediction,
            })
        })
        .collect()
}

/// Fractions of random d-tuples that are proximal, delta-separated,
/// Li-Yorke and asymptotic at horizon N.
///
/// CSV columns: map, alpha, d, delta, eps_prox, N, samples, then
/// frac_X, frac_X_lo, frac_X_hi (Wilson 95%) for X in proximal, separated, ly,
/// asymptotic_proxy, late_separated, then prediction, ly_threshold,
/// conservative_threshold. One row per checkpoint horizon.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TuplesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    /// Tuple size
    #[arg(long, value_parser = parse_usize)]
    pub d: Option<usize>,
    /// Horizon (iterations of the product map)
    #[arg(long = "N", value_parser = parse_usize)]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Separation threshold [default: 1/3 for d = 2, min(1/3, 0.8/(2(d-2))) otherwise]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Proximality threshold
    #[arg(long)]
    pub eps_prox: Option<f64>,
    #[arg(long, value_parser = parse_usize)]
    pub burn_in: Option<usize>,
    /// Base seed of the sample stream
    #[arg(long, value_parser = parse_count)]
    pub seed: Option<u64>,
    /// Number of tuples
    #[arg(long, value_parser = parse_count)]
    pub samples: Option<u64>,
    /// Extra horizons below N reported from the same orbits
    #[arg(long, value_delimiter = ',', value_parser = parse_usize)]
    pub checkpoints: Option<Vec<usize>>,
    /// Also test one-step expansion on this many pairs (0 disables)
    #[arg(long, value_parser = parse_count)]
    pub expansivity_trials: Option<u64>,
    /// Also measure hits of the separation box with this side (d >= 3)
    #[arg(long)]
    pub box_eta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuplesConfig {
    pub map: String,
    pub alpha: f64,
    pub beta: f64,
    pub metric: Metric,
    #[serde(deserialize_with = "count")]
    pub d: usize,
    #[serde(rename = "N", deserialize_with = "count")]
    pub n: usize,
    pub delta: Option<f64>,
    pub eps_prox: f64,
    #[serde(deserialize_with = "count")]
    pub burn_in: usize,
    #[serde(deserialize_with = "count")]
    pub seed: u64,
    #[serde(deserialize_with = "count")]
    pub samples: u64,
    #[serde(deserialize_with = "counts")]
    pub checkpoints: Vec<usize>,
    #[serde(deserialize_with = "count")]
    pub expansivity_trials: u64,
    pub box_eta: Option<f64>,
}

impl Default for TuplesConfig {
    fn default() -> Self {
        Self {
            map: "manpom".into(),
            alpha: 2.5,
            beta: 2.0,
            metric: Metric::Interval,
            d: 2,
            n: 100_000,
            delta: None,
            eps_prox: intermittent::tuples::DEFAULT_EPS_PROX,
            burn_in: 0,
            seed: 1,
            samples: 500,
            checkpoints: Vec::new(),
            expansivity_trials: 0,
            box_eta: None,
        }
    }
}

pub fn compute(mut cfg: TuplesConfig) -> Result<Output, CliError> {
    let map = build_map(&cfg.map, cfg.alpha, cfg.beta, cfg.metric)?;
    let delta = *cfg.delta.get_or_insert(default_delta(cfg.d));
    let mut horizons = cfg.checkpoints.clone();
    horizons.push(cfg.n);
    horizons.sort_unstable();
    horizons.dedup();
    if horizons.last() != Some(&cfg.n) {
        return Err(CliError::Config(format!("checkpoints must not exceed N = {}", cfg.n)));
    }
    let tc = TupleConfig::new(map.clone(), cfg.d, cfg.n)
        .with_delta(delta)
        .with_eps_prox(cfg.eps_prox)
        .with_burn_in(cfg.burn_in)
        .with_seed(cfg.seed);
    let rows = measure_at_horizons(&tc, cfg.samples, &horizons, 0)?;

    let mut summary = json!({ "map": map_name(&map), "rows": rows_summary(&rows) });
    let mut excluded = 0;
    if cfg.expansivity_trials > 0 {
        let r = expansivity_check(&map, cfg.expansivity_trials, cfg.seed)?;
        excluded += r.excluded;
        summary["expansivity"] = to_value(&r)?;
    }
    if let Some(eta) = cfg.box_eta {
        let r = separation_box_hit(&map, cfg.d, eta, cfg.n, cfg.samples, cfg.seed)?;
        let by: Vec<Value> = horizons
            .iter()
            .map(|&h| json!({ "N": h, "fraction": fraction_json(&r.fraction_by(h)) }))
            .collect();
        summary["separation_box"] = json!({ "eta": eta, "box_measure": r.box_measure, "boxes": r.boxes, "hits": by });
    }
    Ok(Output {
        subcommand: "tuples",
        config: to_value(&cfg)?,
        seed: Some(cfg.seed),
        csv: phase_csv(&rows),
        summary,
        counters: counters(&[("censored", 0), ("excluded", excluded)]),
        chart: None,
    })
}

/// Phase diagram over a grid of Manneville-Pomeau exponents and tuple sizes.
///
/// CSV columns as for `tuples`, one row per (alpha, d) cell, alpha-major.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SweepArgs {
    /// Comma-separated exponents
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Comma-separated tuple sizes
    #[arg(long, value_delimiter = ',', value_parser = parse_usize)]
    pub ds: Option<Vec<usize>>,
    /// Orbit length per tuple
    #[arg(long = "N", value_parser = parse_usize)]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Tuples per cell
    #[arg(long, value_parser = parse_count)]
    pub samples: Option<u64>,
    /// Base seed; each cell derives its own stream
    #[arg(long, value_parser = parse_count)]
    pub seed: Option<u64>,
    /// Fixed separation threshold for every d [default: per-d rule as in `tuples`]
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    #[serde(deserialize_with = "counts")]
    pub ds: Vec<usize>,
    #[serde(rename = "N", deserialize_with = "count")]
    pub n: usize,
    #[serde(deserialize_with = "count")]
    pub samples: u64,
    #[serde(deserialize_with = "count")]
    pub seed: u64,
    pub delta: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alphas: vec![1.2, 1.7],
            ds: vec![2, 3],
            n: 100_000,
            samples: 500,
            seed: 1,
            delta: None,
        }
    }
}

pub fn compute_sweep(cfg: SweepConfig) -> Result<Output, CliError> {
    let rule = cfg.delta.map_or(DeltaRule::Default, DeltaRule::Fixed);
    let diagram = phase_sweep(&cfg.alphas, &cfg.ds, rule, cfg.n, cfg.samples, cfg.seed)?;
    Ok(Output {
        subcommand: "sweep",
        config: to_value(&cfg)?,
        seed: Some(cfg.seed),
        csv: phase_csv(&diagram.rows),
        summary: json!({ "rows": rows_summary(&diagram.rows) }),
        counters: counters(&[("censored", 0), ("excluded", 0)]),
        chart: None,
    })
}
