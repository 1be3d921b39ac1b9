//! The acceptance suite: eleven numbered criteria, each a set of checks
//! with explicit tolerances.

use std::collections::HashMap;
use std::time::Instant;

use clap::ValueEnum;
use intermittent::fit::{loglog_fit, Verdict};
use intermittent::inducing::{cylinder_partition, return_time, tail_from_structure, ReturnTime};
use intermittent::renewal::{agreement, conservativity_index, tail_exponent_fit, un_montecarlo, un_operator, RenewalSeq};
use intermittent::transfer::{build_ulam, exactness_decay, finite_set_decay, invariant_density, Mesh};
use intermittent::tuples::{expansivity_check, measure_at_horizons, TupleConfig};
use intermittent::MapSpec;
use serde::{Deserialize, Serialize};

use crate::commands::{density, induce, renewal, tuples};
use crate::error::CliError;
use crate::output::Output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Parameters exactly as the criteria state them.
    Full,
    /// Reduced sizes for smoke runs; tolerances unchanged.
    Quick,
}

pub const CRITERIA: [(u32, &str); 11] = [
    (1, "preimage-sequence exponent"),
    (2, "return-time tail"),
    (3, "invariant density"),
    (4, "renewal exponent"),
    (5, "conservativity verdicts"),
    (6, "one-step expansivity"),
    (7, "pairs are 1/3-Li-Yorke"),
    (8, "phase transition at d = 3"),
    (9, "full-measure case"),
    (10, "exactness and decay"),
    (11, "reproducibility across worker counts"),
];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: String,
    pub bound: String,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: impl Into<String>, bound: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            value: value.into(),
            bound: bound.into(),
            passed,
        }
    }

    fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let ok = (value - target).abs() <= tol;
        Self::new(name, format!("{value:.6}"), format!("{target:.6} +- {tol}"), ok)
    }

    fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, format!("{value:.6e}"), format!("<= {bound:e}"), value <= bound)
    }

    fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, format!("{value:.6}"), format!(">= {bound}"), value >= bound)
    }

    fn verdict(name: impl Into<String>, got: Verdict, want: Verdict) -> Self {
        Self::new(name, format!("{got:?}"), format!("{want:?}"), got == want)
    }

    fn info(name: impl Into<String>, value: impl Into<String>) -> Self {
        Self::new(name, value, "reported", true)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
    /// Set when the computation itself failed.
    pub error: Option<String>,
}

impl CriterionResult {
    /// One-line report: `PASS  4 renewal exponent (12.3 s)`.
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds
        )
    }
}

struct Params {
    yn_max: usize,
    cells: usize,
    renewal_cells: usize,
    renewal_n: usize,
    mc_samples: u64,
    mc_horizon: usize,
    pairs: u64,
    tuple_n: usize,
    tuple_samples: u64,
    doubling_n: usize,
    doubling_samples: u64,
    decay_n: usize,
}

impl Params {
    fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Full => Self {
                yn_max: 100_000,
                cells: 1 << 14,
                renewal_cells: 1 << 15,
                renewal_n: 10_000,
                mc_samples: 1_000_000,
                mc_horizon: 1_000,
                pairs: 1_000_000,
                tuple_n: 1_000_000,
                tuple_samples: 500,
                doubling_n: 10_000,
                doubling_samples: 1_000,
                decay_n: 10_000,
            },
            Scale::Quick => Self {
                yn_max: 10_000,
                cells: 1 << 11,
                renewal_cells: 1 << 12,
                renewal_n: 2_000,
                mc_samples: 20_000,
                mc_horizon: 200,
                pairs: 10_000,
                tuple_n: 20_000,
                tuple_samples: 100,
                doubling_n: 2_000,
                doubling_samples: 200,
                decay_n: 2_000,
            },
        }
    }
}

/// Runs criteria and keeps the renewal sequences shared by criteria 4 and 5.
pub struct Suite {
    scale: Scale,
    seed: u64,
    p: Params,
    renewal: HashMap<u64, RenewalSeq>,
}

impl Suite {
    pub fn new(scale: Scale, seed: u64) -> Self {
        Self {
            scale,
            seed,
            p: Params::for_scale(scale),
            renewal: HashMap::new(),
        }
    }

    pub fn run(&mut self, id: u32) -> CriterionResult {
        let title = CRITERIA
            .iter()
            .find(|c| c.0 == id)
            .map(|c| c.1)
            .unwrap_or("unknown criterion");
        let start = Instant::now();
        let outcome = match id {
            1 => self.c1(),
            2 => self.c2(),
            3 => self.c3(),
            4 => self.c4(),
            5 => self.c5(),
            6 => self.c6(),
            7 => self.c7(),
            8 => self.c8(),
            9 => self.c9(),
            10 => self.c10(),
            11 => self.c11(),
            _ => Err(CliError::Config(format!("no criterion {id}; valid ids are 1 to 11"))),
        };
        let seconds = start.elapsed().as_secs_f64();
        match outcome {
            Ok(checks) => CriterionResult {
                id,
                title,
                passed: checks.iter().all(|c| c.passed),
                seconds,
                checks,
                error: None,
            },
            Err(e) => CriterionResult {
                id,
                title,
                passed: false,
                seconds,
                checks: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    }

    fn c1(&self) -> Result<Vec<Check>, CliError> {
        let mut checks = Vec::new();
        for alpha in [1.5, 2.0, 4.0] {
            let rs = cylinder_partition(&MapSpec::manpom(alpha)?, self.p.yn_max)?;
            let fit = loglog_fit(rs.y_seq(), 100, self.p.yn_max)?;
            checks.push(Check::within(format!("alpha={alpha} slope of log y_n"), fit.slope, -1.0 / alpha, 0.02));
        }
        Ok(checks)
    }

    fn c2(&self) -> Result<Vec<Check>, CliError> {
        let mut checks = Vec::new();
        for alpha in [0.5, 1.5, 2.0, 4.0] {
            let map = MapSpec::manpom(alpha)?;
            let rs = cylinder_partition(&map, self.p.yn_max)?;
            // Leb{tau >= n+2} assembled from the cylinders {tau = k}, k <= n+1.
            let (mut covered, mut worst) = (0.0, 0.0f64);
            for n in 0..=1000usize {
                let c = &rs.cylinders()[n];
                covered += c.hi - c.lo;
                worst = worst.max(((0.5 - covered) - 0.5 * rs.y_seq()[n]).abs());
            }
            checks.push(Check::at_most(format!("alpha={alpha} max |Leb(tau>=n+2) - y_n/2|, n<=1000"), worst, 1e-12));
            // Direct iteration from each cylinder midpoint returns at its label.
            let mut mismatches = 0;
            for c in &rs.cylinders()[..1001] {
                let y = 0.5 * (c.lo + c.hi);
                if return_time(&map, y, 10 * c.return_time)? != ReturnTime::Returned(c.return_time) {
                    mismatches += 1;
                }
            }
            checks.push(Check::at_most(format!("alpha={alpha} cylinder labels contradicted by iteration"), mismatches as f64, 0.0));
            let report = tail_from_structure(&rs, None)?;
            checks.push(Check::within(format!("alpha={alpha} tail exponent"), report.fit.slope, -1.0 / alpha, 0.05));
            if alpha == 2.0 {
                checks.push(Check::verdict("alpha=2 first moment", report.verdict, Verdict::Divergent));
            }
            if alpha == 0.5 {
                checks.push(Check::verdict("alpha=0.5 first moment", report.verdict, Verdict::Convergent));
            }
        }
        Ok(checks)
    }

    fn c3(&self) -> Result<Vec<Check>, CliError> {
        let mut checks = Vec::new();
        let doubling = MapSpec::doubling();
        let op = build_ulam(&doubling, &Mesh::uniform(1 << 10)?)?;
        let h = invariant_density(&op, 1e-12, 1000)?;
        let dev = h.h.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most("doubling max |h - 1|", dev, 1e-12));

        let map = MapSpec::manpom(0.5)?;
        let solve = |cells: usize| -> Result<_, CliError> {
            let op = build_ulam(&map, &Mesh::for_manpom(&map, cells, None)?)?;
            Ok(invariant_density(&op, 1e-12, 10_000)?)
        };
        let coarse = solve(self.p.cells)?;
        let fine = solve(2 * self.p.cells)?;
        let ratio = coarse.weighted_ratio(0.5, 1e-4, 1.0);
        checks.push(Check::at_most("alpha=0.5 sup/inf of h x^0.5 on [1e-4, 1]", ratio.ratio, 50.0));
        let rel = coarse.l1_distance_on(&fine, 0.0, 1.0) / fine.integral_on(0.0, 1.0);
        checks.push(Check::at_most("alpha=0.5 relative L1 change under refinement", rel, 0.05));
        Ok(checks)
    }

    fn sequence(&mut self, alpha: f64) -> Result<&RenewalSeq, CliError> {
        let key = alpha.to_bits();
        if !self.renewal.contains_key(&key) {
            let op = renewal::operator(&MapSpec::manpom(alpha)?, self.p.renewal_cells, None)?;
            let seq = un_operator(&op, self.p.renewal_n)?;
            self.renewal.insert(key, seq);
        }
        Ok(&self.renewal[&key])
    }

    fn c4(&mut self) -> Result<Vec<Check>, CliError> {
        let mut checks = Vec::new();
        let (n, horizon, samples, seed) = (self.p.renewal_n, self.p.mc_horizon, self.p.mc_samples, self.seed);
        for alpha in [1.5, 2.0, 3.0, 4.0] {
            let seq = self.sequence(alpha)?.clone();
            let fit = tail_exponent_fit(&seq, (100, n))?;
            checks.push(Check::within(format!("alpha={alpha} slope of log u_n"), fit.slope, 1.0 / alpha - 1.0, 0.1));
            checks.push(Check::at_most(format!("alpha={alpha} |u_0 - 1/2|"), (seq.u[0] - 0.5).abs(), 1e-12));
            checks.push(Check::at_most(format!("alpha={alpha} |u_1 - 1/4|"), (seq.u[1] - 0.25).abs(), 1e-12));
            let mc = un_montecarlo(&MapSpec::manpom(alpha)?, horizon, samples, seed)?;
            let a = agreement(&seq, &mc, horizon, 4.0)?;
            checks.push(Check::at_most(
                format!("alpha={alpha} n<={horizon} beyond 4 sigma (max z {:.2})", a.max_z),
                a.violations as f64,
                0.0,
            ));
        }
        Ok(checks)
    }

    fn c5(&mut self) -> Result<Vec<Check>, CliError> {
        let mut checks = Vec::new();
        let rows = [
            (2, 1.5, Some(Verdict::Divergent)),
            (3, 1.3, Some(Verdict::Divergent)),
            (2, 3.0, Some(Verdict::Convergent)),
            (3, 2.5, Some(Verdict::Convergent)),
            (2, 2.0, None),
            (3, 1.5, None),
        ];
        for (d, alpha, want) in rows {
            let report = conservativity_index(self.sequence(alpha)?, d)?;
            let name = format!("d={d} alpha={alpha}");
            checks.push(match want {
                Some(w) => Check::verdict(name, report.verdict, w),
                None => Check::info(format!("{name} (critical)"), format!("{:?}", report.verdict)),
            });
        }
        Ok(checks)
    }

    fn c6(&self) -> Result<Vec<Check>, CliError> {
        let mut checks = Vec::new();
        for alpha in [1.0, 1.5, 2.0, 4.0] {
            let r = expansivity_check(&MapSpec::manpom(alpha)?, self.p.pairs, self.seed)?;
            checks.push(Check::at_most(
                format!(
                    "alpha={alpha} violations (min ratio {:.4} at ({:.6}, {:.6}))",
                    r.min_ratio, r.worst_pair.0, r.worst_pair.1
                ),
                r.violations as f64,
                0.0,
            ));
        }
        Ok(checks)
    }

    fn tuple_rows(&self, alpha: f64, d: usize, delta: f64, row: u64) -> Result<Vec<intermittent::tuples::PhaseRow>, CliError> {
        let n = self.p.tuple_n;
        let cfg = TupleConfig::new(MapSpec::manpom(alpha)?, d, n)
            .with_delta(delta)
            .with_eps_prox(1e-3)
            .with_seed(self.seed);
        Ok(measure_at_horizons(&cfg, self.p.tuple_samples, &[n / 10, n], row)?)
    }

    fn c7(&self) -> Result<Vec<Check>, CliError> {
        let rows = self.tuple_rows(2.5, 2, 0.3, 0)?;
        let (early, late) = (&rows[0], &rows[1]);
        Ok(vec![
            Check::at_least(format!("frac_LY at N={}", late.horizon), late.li_yorke.value, 0.95),
            Check::at_least(
                format!("frac_LY at N={} vs N={}", late.horizon, early.horizon),
                late.li_yorke.value,
                early.li_yorke.value,
            ),
            Check::info("frac_proximal / frac_separated", format!("{} / {}", late.proximal.value, late.separated.value)),
        ])
    }

    fn c8(&self) -> Result<Vec<Check>, CliError> {
        let ly = self.tuple_rows(1.2, 3, 0.2, 1)?;
        let sep = self.tuple_rows(2.5, 3, 0.05, 2)?;
        Ok(vec![
            Check::at_least(format!("alpha=1.2 frac_LY at N={}", ly[1].horizon), ly[1].li_yorke.value, 0.85),
            Check::at_least("alpha=1.2 frac_LY nondecreasing in N", ly[1].li_yorke.value, ly[0].li_yorke.value),
            Check::at_most(
                format!("alpha=2.5 late-separated fraction at N={}", sep[1].horizon),
                sep[1].late_separated.value,
                0.15,
            ),
            Check::at_most(
                "alpha=2.5 late-separated fraction nonincreasing in N",
                sep[1].late_separated.value,
                sep[0].late_separated.value,
            ),
        ])
    }

    fn c9(&self) -> Result<Vec<Check>, CliError> {
        let mut checks = Vec::new();
        for d in [2usize, 3, 4] {
            let cfg = TupleConfig::new(MapSpec::doubling(), d, self.p.doubling_n)
                .with_delta(0.1)
                .with_eps_prox(1e-3)
                .with_seed(self.seed);
            let row = measure_at_horizons(&cfg, self.p.doubling_samples, &[self.p.doubling_n], 10 + d as u64)?.remove(0);
            checks.push(Check::at_least(format!("doubling d={d} frac_LY"), row.li_yorke.value, 0.99));
        }
        Ok(checks)
    }

    fn c10(&self) -> Result<Vec<Check>, CliError> {
        let op = build_ulam(&MapSpec::doubling(), &Mesh::uniform(1 << 10)?)?;
        let odd: Vec<f64> = op.mesh().mids().iter().map(|&x| if x < 0.5 { 1.0 } else { -1.0 }).collect();
        let decay = exactness_decay(&op, &odd, 1)?;

        let map = MapSpec::manpom(2.0)?;
        let op = build_ulam(&map, &Mesh::for_manpom(&map, self.p.cells, None)?)?;
        let ones = vec![1.0; op.cells()];
        let mass = finite_set_decay(&op, (0.5, 1.0), &ones, self.p.decay_n)?;
        let fit = loglog_fit(&mass, 100, self.p.decay_n)?;
        Ok(vec![
            Check::at_most("doubling integral of |L f| for the odd indicator", decay[1], 1e-12),
            Check::within("alpha=2 decay exponent of integral over [1/2, 1] of L^n 1", fit.slope, -0.5, 0.15),
        ])
    }

    fn c11(&self) -> Result<Vec<Check>, CliError> {
        let runs = |workers: usize| -> Result<Vec<Output>, CliError> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            pool.install(|| reproducibility_runs(self.scale, self.seed))
        };
        let reference = runs(1)?;
        let mut checks = Vec::new();
        for workers in [4, 8] {
            let other = runs(workers)?;
            for (a, b) in reference.iter().zip(&other) {
                let same = a.csv == b.csv && a.summary == b.summary;
                checks.push(Check::new(
                    format!("{} output with {workers} workers", a.subcommand),
                    if same { "identical" } else { "differs" },
                    "identical to 1 worker",
                    same,
                ));
            }
        }
        Ok(checks)
    }
}

/// The subcommand runs compared across worker counts, at reduced size.
pub fn reproducibility_runs(scale: Scale, seed: u64) -> Result<Vec<Output>, CliError> {
    let k = if scale == Scale::Full { 4 } else { 1 };
    Ok(vec![
        induce::compute(induce::InduceConfig {
            n: 10_000 * k,
            ..Default::default()
        })?,
        density::compute(density::DensityConfig {
            m: 1 << 12,
            ..Default::default()
        })?,
        renewal::compute(renewal::RenewalConfig {
            n: 1_000 * k,
            m: 1 << 12,
            samples: 10_000 * k as u64,
            mc_horizon: Some(200),
            seed,
            ..Default::default()
        })?,
        tuples::compute(tuples::TuplesConfig {
            n: 10_000 * k,
            samples: 200,
            checkpoints: vec![1_000 * k],
            expansivity_trials: 10_000,
            seed,
            ..Default::default()
        })?,
        tuples::compute(tuples::TuplesConfig {
            map: "doubling".into(),
            d: 3,
            delta: Some(0.1),
            n: 2_000 * k,
            samples: 200,
            seed,
            ..Default::default()
        })?,
        tuples::compute_sweep(tuples::SweepConfig {
            alphas: vec![1.2, 2.5],
            ds: vec![2, 3],
            n: 5_000 * k,
            samples: 100,
            seed,
            ..Default::default()
        })?,
    ])
}
