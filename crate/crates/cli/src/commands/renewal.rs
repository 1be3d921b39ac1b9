//! `renewal`: the renewal sequence u_n, its exponent and conservativity
//! verdicts for product maps.

use clap::Args;
use intermittent::renewal::{
    agreement, conservativity_index, expected_simultaneous_count, simultaneous_return_count, tail_exponent_fit,
    un_montecarlo, un_operator, RenewalSeq,
};
use intermittent::transfer::{build_ulam, default_gamma, Mesh, UlamOperator};
use intermittent::{MapSpec, Metric};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{build_map, counters, to_value, MapArgs};
use crate::config::{count, parse_count, parse_usize};
use crate::error::CliError;
use crate::output::{line_chart, num, opt_num, thin, Csv, Output, Series};

pub const COLUMNS: [&str; 4] = ["n", "u_operator", "u_mc", "stderr"];

/// Renewal sequence u_n = Leb(Y and T^-n Y) on Y = [1/2, 1].
///
/// CSV columns: n, u_operator, u_mc, stderr (rows n = 0..=N; the Monte-Carlo
/// columns are empty beyond mc_horizon or when samples = 0).
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct RenewalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    /// Largest n
    #[arg(long = "N", value_parser = parse_usize)]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Ulam mesh cells
    #[arg(long = "M", value_parser = parse_usize)]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// Mesh grading exponent [default: max(2, 1 + alpha)]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Monte-Carlo starting points (0 disables the validator; otherwise >= 1000)
    #[arg(long, value_parser = parse_count)]
    pub samples: Option<u64>,
    /// Monte-Carlo horizon [default: min(N, 1000)]
    #[arg(long, value_parser = parse_usize)]
    pub mc_horizon: Option<usize>,
    /// Monte-Carlo seed
    #[arg(long, value_parser = parse_count)]
    pub seed: Option<u64>,
    /// Exponent fit window [default: 100 to N]
    #[arg(long, value_parser = parse_usize)]
    pub window_lo: Option<usize>,
    /// End of the fit window
    #[arg(long, value_parser = parse_usize)]
    pub window_hi: Option<usize>,
    /// Agreement threshold in Monte-Carlo standard errors
    #[arg(long)]
    pub k_sigma: Option<f64>,
    /// Also count simultaneous returns of d-tuples to Y^d (0 disables)
    #[arg(long, value_parser = parse_usize)]
    pub simultaneous_d: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenewalConfig {
    pub map: String,
    pub alpha: f64,
    pub beta: f64,
    pub metric: Metric,
    #[serde(rename = "N", deserialize_with = "count")]
    pub n: usize,
    #[serde(rename = "M", deserialize_with = "count")]
    pub m: usize,
    pub gamma: Option<f64>,
    #[serde(deserialize_with = "count")]
    pub samples: u64,
    pub mc_horizon: Option<usize>,
    #[serde(deserialize_with = "count")]
    pub seed: u64,
    pub window_lo: Option<usize>,
    pub window_hi: Option<usize>,
    pub k_sigma: f64,
    #[serde(deserialize_with = "count")]
    pub simultaneous_d: usize,
}

impl Default for RenewalConfig {
    fn default() -> Self {
        Self {
            map: "manpom".into(),
            alpha: 2.0,
            beta: 2.0,
            metric: Metric::Interval,
            n: 10_000,
            m: 1 << 15,
            gamma: None,
            samples: 0,
            mc_horizon: None,
            seed: 1,
            window_lo: None,
            window_hi: None,
            k_sigma: 4.0,
            simultaneous_d: 0,
        }
    }
}

/// Ulam operator on the mesh the renewal command uses.
pub fn operator(map: &MapSpec, cells: usize, gamma: Option<f64>) -> Result<UlamOperator, CliError> {
    let mesh = match map.alpha() {
        Some(alpha) => Mesh::for_manpom(map, cells, Some(gamma.unwrap_or(default_gamma(alpha))))?,
        None => Mesh::graded(cells, gamma.unwrap_or(1.0))?.with_breakpoints(&[0.5]),
    };
    Ok(build_ulam(map, &mesh)?)
}

pub fn compute(mut cfg: RenewalConfig) -> Result<Output, CliError> {
    if cfg.n < 100 {
        return Err(CliError::Config(format!("N must be at least 100, got {}", cfg.n)));
    }
    let map = build_map(&cfg.map, cfg.alpha, cfg.beta, cfg.metric)?;
    let gamma = *cfg
        .gamma
        .get_or_insert(map.alpha().map(default_gamma).unwrap_or(1.0));
    let mc_horizon = *cfg.mc_horizon.get_or_insert(cfg.n.min(1000));
    let window = (*cfg.window_lo.get_or_insert(100), *cfg.window_hi.get_or_insert(cfg.n));
    if mc_horizon > cfg.n {
        return Err(CliError::Config(format!("mc_horizon {mc_horizon} exceeds N = {}", cfg.n)));
    }

    let op = operator(&map, cfg.m, Some(gamma))?;
    let seq = un_operator(&op, cfg.n)?;
    let mc = (cfg.samples > 0)
        .then(|| un_montecarlo(&map, mc_horizon, cfg.samples, cfg.seed))
        .transpose()?;

    let mut csv = Csv::new(&COLUMNS);
    for n in 0..=cfg.n {
        let (u_mc, se) = match &mc {
            Some(m) if n <= m.horizon() => (num(m.u[n]), opt_num(m.stderr.as_ref().map(|s| s[n]))),
            _ => (String::new(), String::new()),
        };
        csv.row(&[n.to_string(), num(seq.u[n]), u_mc, se]);
    }

    let fit = tail_exponent_fit(&seq, window)?;
    let verdicts = (1..=5u32)
        .map(|d| {
            let r = conservativity_index(&seq, d)?;
            Ok(json!({
                "d": d,
                "alpha_star": if r.alpha_star.is_finite() { json!(r.alpha_star) } else { Value::Null },
                "verdict": r.verdict,
                "last_decade_increment": r.last_decade_increment,
                "exponent": r.exponent,
                "extrapolated_limit": r.extrapolated_limit,
                "extrapolated_increment": r.extrapolated_increment,
                "remainder_fraction": r.remainder_fraction,
            }))
        })
        .collect::<Result<Vec<Value>, CliError>>()?;
    let alpha = map.alpha();
    let mut summary = json!({
        "cells": op.cells(),
        "u0": seq.u[0],
        "u1": seq.u[1],
        "window": window,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "target_slope": alpha.map(|a| 1.0 / a - 1.0),
        "verdicts": verdicts,
    });
    if let Some(m) = &mc {
        summary["mc_agreement"] = to_value(&agreement(&seq, m, mc_horizon, cfg.k_sigma)?)?;
    }
    if cfg.simultaneous_d > 0 {
        let d = cfg.simultaneous_d as u32;
        let samples = cfg.samples.max(100);
        let sim = simultaneous_return_count(&map, d, mc_horizon, samples, cfg.seed)?;
        summary["simultaneous"] = json!({
            "d": d,
            "horizon": mc_horizon,
            "samples": samples,
            "mean_count": sim.mean,
            "median_count": sim.median,
            "expected_count": expected_simultaneous_count(&seq, d, mc_horizon),
        });
    }

    let mut series = vec![Series { name: "operator".into(), points: points(&seq) }];
    if let Some(m) = &mc {
        series.push(Series { name: "Monte Carlo".into(), points: points(m) });
    }
    let chart = line_chart(&format!("renewal sequence, {map}"), "n", "u_n", &series, true, true);
    Ok(Output {
        subcommand: "renewal",
        config: to_value(&cfg)?,
        seed: Some(cfg.seed),
        csv: csv.into_string(),
        summary,
        counters: counters(&[("censored", 0), ("excluded", 0)]),
        chart: Some(chart),
    })
}

fn points(seq: &RenewalSeq) -> Vec<(f64, f64)> {
    thin(seq.u.iter().enumerate().skip(1).map(|(n, &u)| (n as f64, u)).collect(), 400)
}
