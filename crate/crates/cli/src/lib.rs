//! Command-line experiment runner for intermittent interval maps.
//!
//! Every subcommand writes `<cmd>.csv`, `<cmd>_summary.json` and
//! `<cmd>_manifest.json` (plus `<cmd>.svg` with `--svg`) into the output
//! directory: `--out`, else `$INTERMITTENT_OUT`, else `./out`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure or failed acceptance criteria.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use acceptance::{Scale, Suite, CRITERIA};
use commands::{density, induce, renewal, tuples};
use config::{count, counts, parse_count, read_table, resolve};
use error::CliError;
use output::{num, unix_now, write_run, Csv, Output};

pub const OUT_ENV: &str = "INTERMITTENT_OUT";

#[derive(Debug, Parser)]
#[command(name = "intermittent", version, about = "Numerical experiments on Manneville-Pomeau maps")]
pub struct Cli {
    /// Output directory [default: $INTERMITTENT_OUT, then ./out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: available cores]; results do not depend on it
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// TOML file of flat keys named like the long flags (or a JSON run manifest)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Also write a minimal SVG line chart where one makes sense
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Preimage sequence and return-time tail on Y = [1/2, 1]
    Induce(induce::InduceArgs),
    /// Invariant density from the Ulam operator
    Density(density::DensityArgs),
    /// Renewal sequence, its exponent and product conservativity
    Renewal(renewal::RenewalArgs),
    /// Li-Yorke statistics for one (map, d) cell
    Tuples(tuples::TuplesArgs),
    /// Phase diagram over alphas x ds
    Sweep(tuples::SweepArgs),
    /// Run the acceptance criteria
    Accept(AcceptArgs),
}

/// Runs the acceptance criteria and writes a pass/fail table.
///
/// CSV columns: criterion, title, passed, seconds, failed_checks.
/// The summary JSON lists every check with its measured value and bound.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct AcceptArgs {
    /// Criterion set; only `primary` exists
    #[arg(long)]
    pub suite: Option<String>,
    /// full runs the stated sizes, quick a reduced smoke run
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    /// Comma-separated criterion ids [default: all]
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub only: Option<Vec<u64>>,
    /// Base seed for every stochastic criterion
    #[arg(long, value_parser = parse_count)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptConfig {
    pub suite: String,
    pub scale: Scale,
    #[serde(deserialize_with = "counts")]
    pub only: Vec<u32>,
    #[serde(deserialize_with = "count")]
    pub seed: u64,
}

impl Default for AcceptConfig {
    fn default() -> Self {
        Self {
            suite: "primary".into(),
            scale: Scale::Full,
            only: CRITERIA.iter().map(|c| c.0).collect(),
            seed: 1,
        }
    }
}

/// Runs the selected criteria, echoing one line per criterion to stderr.
pub fn accept(cfg: AcceptConfig) -> Result<(Output, usize), CliError> {
    if cfg.suite != "primary" {
        return Err(CliError::Config(format!("unknown suite `{}` (expected primary)", cfg.suite)));
    }
    let mut suite = Suite::new(cfg.scale, cfg.seed);
    let mut results = Vec::new();
    for &id in &cfg.only {
        let r = suite.run(id);
        eprintln!("{}", r.line());
        results.push(r);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let mut csv = Csv::new(&["criterion", "title", "passed", "seconds", "failed_checks"]);
    for r in &results {
        let failing: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        let mut reason = failing.join("; ");
        if let Some(e) = &r.error {
            reason = e.clone();
        }
        csv.row(&[
            r.id.to_string(),
            r.title.to_string(),
            r.passed.to_string(),
            num(r.seconds),
            reason.replace(',', " "),
        ]);
    }
    let summary = json!({
        "suite": cfg.suite,
        "scale": cfg.scale,
        "passed": results.len() - failed,
        "failed": failed,
        "all_passed": failed == 0,
        "criteria": results,
    });
    let output = Output {
        subcommand: "accept",
        config: commands::to_value(&cfg)?,
        seed: Some(cfg.seed),
        csv: csv.into_string(),
        summary,
        counters: commands::counters(&[("censored", 0), ("excluded", 0)]),
        chart: None,
    };
    Ok((output, failed))
}

/// Output directory: flag, then environment, then `./out`.
pub fn out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Parses `argv` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(path) => {
            eprintln!("wrote {}", path.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command; returns the manifest path.
pub fn execute(cli: &Cli) -> Result<PathBuf, CliError> {
    let started = unix_now();
    let file = read_table(cli.config.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let workers = pool.current_num_threads();
    let dir = out_dir(cli.out.as_deref());
    let (output, failed) = pool.install(|| -> Result<(Output, usize), CliError> {
        Ok(match &cli.command {
            Command::Induce(a) => (induce::compute(resolve(file, a)?)?, 0),
            Command::Density(a) => (density::compute(resolve(file, a)?)?, 0),
            Command::Renewal(a) => (renewal::compute(resolve(file, a)?)?, 0),
            Command::Tuples(a) => (tuples::compute(resolve(file, a)?)?, 0),
            Command::Sweep(a) => (tuples::compute_sweep(resolve(file, a)?)?, 0),
            Command::Accept(a) => accept(resolve(file, a)?)?,
        })
    })?;
    let path = write_run(&dir, &output, cli.svg, workers, started)?;
    if failed > 0 {
        return Err(CliError::AcceptanceFailed { failed });
    }
    Ok(path)
}

#[cfg(test)]
mod tests;
