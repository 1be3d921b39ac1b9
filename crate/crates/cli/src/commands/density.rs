//! `density`: Ulam approximation of the invariant density.

use clap::Args;
use intermittent::transfer::{build_ulam, default_gamma, invariant_density, Mesh};
use intermittent::{MapKind, Metric};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{build_map, counters, to_value, MapArgs};
use crate::config::{count, parse_usize};
use crate::error::CliError;
use crate::output::{line_chart, num, Csv, Output, Series};

pub const COLUMNS: [&str; 4] = ["cell_mid", "cell_width", "h", "h_times_x_alpha"];

/// Invariant density on a graded Ulam mesh.
///
/// CSV columns: cell_mid, cell_width, h, h_times_x_alpha (one row per cell).
/// For alpha >= 1 the density is pinned to 1 on the last cell instead of
/// being normalised to probability.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct DensityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapArgs,
    /// Number of mesh cells before breakpoints are inserted
    #[arg(long = "M", value_parser = parse_usize)]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// Mesh grading exponent [default: max(2, 1 + alpha); 1 for doubling]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Power-iteration tolerance (L1 increment)
    #[arg(long)]
    pub tol: Option<f64>,
    /// Power-iteration cap
    #[arg(long, value_parser = parse_usize)]
    pub max_iter: Option<usize>,
    /// Window [window_lo, window_hi] for sup/inf of h(x) x^alpha
    #[arg(long)]
    pub window_lo: Option<f64>,
    /// Upper end of that window
    #[arg(long)]
    pub window_hi: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    pub map: String,
    pub alpha: f64,
    pub beta: f64,
    pub metric: Metric,
    #[serde(rename = "M", deserialize_with = "count")]
    pub m: usize,
    pub gamma: Option<f64>,
    pub tol: f64,
    #[serde(deserialize_with = "count")]
    pub max_iter: usize,
    pub window_lo: f64,
    pub window_hi: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            map: "manpom".into(),
            alpha: 0.5,
            beta: 2.0,
            metric: Metric::Interval,
            m: 1 << 14,
            gamma: None,
            tol: 1e-12,
            max_iter: 10_000,
            window_lo: 1e-4,
            window_hi: 1.0,
        }
    }
}

pub fn compute(mut cfg: DensityConfig) -> Result<Output, CliError> {
    let map = build_map(&cfg.map, cfg.alpha, cfg.beta, cfg.metric)?;
    let mesh = match map.alpha() {
        Some(alpha) => {
            let gamma = *cfg.gamma.get_or_insert(default_gamma(alpha));
            Mesh::for_manpom(&map, cfg.m, Some(gamma))?
        }
        None => Mesh::graded(cfg.m, *cfg.gamma.get_or_insert(1.0))?,
    };
    let op = build_ulam(&map, &mesh)?;
    let h = invariant_density(&op, cfg.tol, cfg.max_iter)?;
    let weight = match map.kind() {
        MapKind::ManPom { alpha } | MapKind::ManPomTwo { alpha, .. } => *alpha,
        _ => 0.0,
    };
    let mut csv = Csv::new(&COLUMNS);
    for i in 0..h.h.len() {
        csv.row(&[num(h.mids[i]), num(h.widths[i]), num(h.h[i]), num(h.h[i] * h.mids[i].powf(weight))]);
    }
    let ratio = h.weighted_ratio(weight, cfg.window_lo, cfg.window_hi);
    let summary = json!({
        "cells": op.cells(),
        "nnz": op.nnz(),
        "normalization": h.normalization,
        "iterations": h.iterations,
        "increment": h.increment,
        "residual": h.residual,
        "mass": h.mass,
        "absorbing_cells": h.absorbing_cells,
        "window": [cfg.window_lo, cfg.window_hi],
        "weight_exponent": weight,
        "weighted_sup": ratio.sup,
        "weighted_inf": ratio.inf,
        "weighted_ratio": ratio.ratio,
        "window_cells": ratio.cells,
    });
    let chart = line_chart(
        &format!("invariant density, {map}"),
        "x",
        "h(x)",
        &[Series {
            name: "h".into(),
            points: h.mids.iter().copied().zip(h.h.iter().copied()).collect(),
        }],
        true,
        true,
    );
    Ok(Output {
        subcommand: "density",
        config: to_value(&cfg)?,
        seed: None,
        csv: csv.into_string(),
        summary,
        counters: counters(&[("censored", 0), ("excluded", h.absorbing_cells as u64)]),
        chart: Some(chart),
    })
}
