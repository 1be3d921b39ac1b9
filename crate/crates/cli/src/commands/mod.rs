//! One module per subcommand. Each exposes clap `Args` (every flag optional),
//! a serde `Config` with the defaults, and a pure `compute` returning an
//! [`Output`](crate::output::Output).

pub mod density;
pub mod induce;
pub mod renewal;
pub mod tuples;

use std::collections::BTreeMap;

use clap::Args;
use intermittent::{MapSpec, Metric};
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Map selection flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct MapArgs {
    /// Map name: manpom, manpom2 or doubling
    #[arg(long)]
    pub map: Option<String>,
    /// Exponent of the neutral fixed point at 0
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Exponent of the neutral fixed point at 1 (manpom2 only)
    #[arg(long)]
    pub beta: Option<f64>,
    /// Distance on [0, 1]: interval or circle
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<Metric>,
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: intermittent::Error| e.to_string())
}

pub(crate) fn build_map(name: &str, alpha: f64, beta: f64, metric: Metric) -> Result<MapSpec, CliError> {
    Ok(MapSpec::by_name(name, alpha, beta)?.with_metric(metric))
}

pub(crate) fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Config(e.to_string()))
}

pub(crate) fn counters(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}
