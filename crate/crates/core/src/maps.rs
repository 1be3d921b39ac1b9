//! Piecewise monotone interval maps: Manneville-Pomeau, its two-sided
//! variant, the doubling map and user-assembled branch lists.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::root::solve_monotone;

/// Points this far outside `[0, 1]` are clamped instead of rejected.
pub const DOMAIN_TOL: f64 = 1e-12;

/// Closed-form branch formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "snake_case")]
pub enum Formula {
    /// `slope * x + offset`
    Affine { slope: f64, offset: f64 },
    /// `x (1 + (2x)^alpha)`: neutral fixed point at 0.
    NeutralLeft { alpha: f64 },
    /// `x - (1 - x) (2 (1 - x))^beta`: neutral fixed point at 1.
    NeutralRight { beta: f64 },
}

impl Formula {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Formula::Affine { slope, offset } => slope * x + offset,
            Formula::NeutralLeft { alpha } => x * (1.0 + (2.0 * x).powf(alpha)),
            Formula::NeutralRight { beta } => {
                let r = 1.0 - x;
                x - r * (2.0 * r).powf(beta)
            }
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Formula::Affine { slope, .. } => slope,
            Formula::NeutralLeft { alpha } => 1.0 + (1.0 + alpha) * (2.0 * x).powf(alpha),
            Formula::NeutralRight { beta } => 1.0 + (1.0 + beta) * (2.0 * (1.0 - x)).powf(beta),
        }
    }

    pub fn is_affine(&self) -> Option<f64> {
        match *self {
            Formula::Affine { slope, .. } => Some(slope),
            _ => None,
        }
    }
}

/// One monotone piece of a map, defined on `[lo, hi)` (closed at 1 for the
/// last branch).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    #[serde(flatten)]
    pub formula: Formula,
}

impl Branch {
    pub fn new(lo: f64, hi: f64, formula: Formula) -> Self {
        Self { lo, hi, formula }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.formula.value(x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        self.formula.derivative(x)
    }

    /// Image endpoints `(T(lo), T(hi))` using the closed form at both ends.
    pub fn image(&self) -> (f64, f64) {
        (self.value(self.lo), self.value(self.hi))
    }

    pub fn increasing(&self) -> bool {
        let (a, b) = self.image();
        b > a
    }

    /// Preimage of `y` inside this branch's closed domain.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if let Formula::Affine { slope, offset } = self.formula {
            return Ok(((y - offset) / slope).clamp(self.lo, self.hi));
        }
        solve_monotone(
            |x| self.value(x),
            |x| self.derivative(x),
            y,
            self.lo,
            self.hi,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapKind {
    /// `x(1 + 2^a x^a)` on `[0, 1/2)`, `2x - 1` on `[1/2, 1]`.
    ManPom { alpha: f64 },
    /// Neutral fixed points at both 0 and 1.
    ManPomTwo { alpha: f64, beta: f64 },
    /// `2x mod 1`. In binary64 every orbit is dyadic and reaches 0 within 53 steps.
    Doubling,
    Custom { branches: Vec<Branch> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Interval,
    Circle,
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "interval" => Ok(Metric::Interval),
            "circle" => Ok(Metric::Circle),
            other => Err(Error::InvalidParameter(format!(
                "unknown metric `{other}` (expected interval or circle)"
            ))),
        }
    }
}

/// A validated piecewise monotone self-map of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSpec {
    kind: MapKind,
    metric: Metric,
    #[serde(skip)]
    branches: Vec<Branch>,
}

impl MapSpec {
    pub fn manpom(alpha: f64) -> Result<Self> {
        check_exponent("alpha", alpha)?;
        Ok(Self::from_parts(
            MapKind::ManPom { alpha },
            vec![
                Branch::new(0.0, 0.5, Formula::NeutralLeft { alpha }),
                Branch::new(0.5, 1.0, Formula::Affine { slope: 2.0, offset: -1.0 }),
            ],
        ))
    }

    pub fn manpom_two(alpha: f64, beta: f64) -> Result<Self> {
        check_exponent("alpha", alpha)?;
        check_exponent("beta", beta)?;
        Ok(Self::from_parts(
            MapKind::ManPomTwo { alpha, beta },
            vec![
                Branch::new(0.0, 0.5, Formula::NeutralLeft { alpha }),
                Branch::new(0.5, 1.0, Formula::NeutralRight { beta }),
            ],
        ))
    }

    pub fn doubling() -> Self {
        Self::from_parts(
            MapKind::Doubling,
            vec![
                Branch::new(0.0, 0.5, Formula::Affine { slope: 2.0, offset: 0.0 }),
                Branch::new(0.5, 1.0, Formula::Affine { slope: 2.0, offset: -1.0 }),
            ],
        )
    }

    /// Builds a map from explicit branches, checking that they tile `[0, 1]`,
    /// are strictly monotone and map into `[0, 1]`.
    pub fn custom(branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidBranches("no branches".into()));
        }
        let mut edge = 0.0;
        for (k, b) in branches.iter().enumerate() {
            if b.lo != edge {
                return Err(Error::InvalidBranches(format!(
                    "branch {k} starts at {} but the previous one ends at {edge}",
                    b.lo
                )));
            }
            if !(b.hi > b.lo) {
                return Err(Error::InvalidBranches(format!("branch {k} is empty")));
            }
            edge = b.hi;
            match b.formula {
                Formula::Affine { slope, .. } if slope == 0.0 || !slope.is_finite() => {
                    return Err(Error::InvalidBranches(format!("branch {k} has slope {slope}")))
                }
                Formula::NeutralLeft { alpha } => check_exponent("alpha", alpha)?,
                Formula::NeutralRight { beta } => check_exponent("beta", beta)?,
                _ => {}
            }
            let (fa, fb) = b.image();
            let within = |v: f64| v >= -DOMAIN_TOL && v <= 1.0 + DOMAIN_TOL;
            if !within(fa) || !within(fb) {
                return Err(Error::InvalidBranches(format!(
                    "branch {k} maps outside [0, 1]: image [{fa}, {fb}]"
                )));
            }
            // Spot-check strict monotonicity on a grid.
            let grid = 64;
            let sign = (fb - fa).signum();
            let mut prev = fa;
            for i in 1..=grid {
                let x = b.lo + (b.hi - b.lo) * i as f64 / grid as f64;
                let v = b.value(x);
                if (v - prev) * sign <= 0.0 {
                    return Err(Error::InvalidBranches(format!(
                        "branch {k} is not strictly monotone near {x}"
                    )));
                }
                prev = v;
            }
        }
        if edge != 1.0 {
            return Err(Error::InvalidBranches(format!("branches end at {edge}, not 1")));
        }
        Ok(Self::from_parts(MapKind::Custom { branches: branches.clone() }, branches))
    }

    /// Looks a map up by name: `manpom`, `manpom2`, `doubling`.
    pub fn by_name(name: &str, alpha: f64, beta: f64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "manpom" | "mp" => Self::manpom(alpha),
            "manpom2" | "manpom_two" | "mp2" => Self::manpom_two(alpha, beta),
            "doubling" => Ok(Self::doubling()),
            other => Err(Error::InvalidParameter(format!(
                "unknown map `{other}` (expected manpom, manpom2 or doubling)"
            ))),
        }
    }

    fn from_parts(kind: MapKind, branches: Vec<Branch>) -> Self {
        Self {
            kind,
            metric: Metric::Interval,
            branches,
        }
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// The exponent of the neutral fixed point at 0, if there is one.
    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            MapKind::ManPom { alpha } | MapKind::ManPomTwo { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    pub fn branch_of(&self, x: f64) -> usize {
        let last = self.branches.len() - 1;
        self.branches[..last]
            .iter()
            .position(|b| x < b.hi)
            .unwrap_or(last)
    }

    /// `T(x)` with domain checking.
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.step(check_domain(x)?))
    }

    /// `T(x)` for `x` already in `[0, 1]`; the result is clamped to `[0, 1]`.
    #[inline]
    pub fn step(&self, x: f64) -> f64 {
        let y = match self.kind {
            MapKind::ManPom { alpha } => {
                if x < 0.5 {
                    x * (1.0 + (2.0 * x).powf(alpha))
                } else {
                    2.0 * x - 1.0
                }
            }
            MapKind::Doubling => {
                if x < 0.5 {
                    2.0 * x
                } else {
                    2.0 * x - 1.0
                }
            }
            _ => self.branches[self.branch_of(x)].value(x),
        };
        y.clamp(0.0, 1.0)
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let x = check_domain(x)?;
        Ok(self.branches[self.branch_of(x)].derivative(x))
    }

    /// Trajectory `[x, T(x), ..., T^n(x)]`.
    pub fn eval_n(&self, x: f64, n: usize) -> Result<Vec<f64>> {
        let x = check_domain(x)?;
        let mut out = Vec::with_capacity(n + 1);
        out.extend(self.orbit(x).take(n + 1));
        Ok(out)
    }

    /// Streaming orbit starting at `x` (which is clamped into `[0, 1]`).
    pub fn orbit(&self, x: f64) -> Orbit<'_> {
        Orbit {
            map: self,
            next: x.clamp(0.0, 1.0),
        }
    }

    #[inline]
    pub fn dist(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        match self.metric {
            Metric::Interval => d,
            Metric::Circle => d.min(1.0 - d),
        }
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let metric = match self.metric {
            Metric::Interval => "interval",
            Metric::Circle => "circle",
        };
        match &self.kind {
            MapKind::ManPom { alpha } => write!(f, "map=manpom alpha={alpha} metric={metric}"),
            MapKind::ManPomTwo { alpha, beta } => {
                write!(f, "map=manpom2 alpha={alpha} beta={beta} metric={metric}")
            }
            MapKind::Doubling => write!(f, "map=doubling metric={metric}"),
            MapKind::Custom { branches } => {
                write!(f, "map=custom branches={} metric={metric}", branches.len())
            }
        }
    }
}

pub struct Orbit<'a> {
    map: &'a MapSpec,
    next: f64,
}

impl Iterator for Orbit<'_> {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        let x = self.next;
        self.next = self.map.step(x);
        Some(x)
    }
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_domain(x: f64) -> Result<f64> {
    if x >= -DOMAIN_TOL && x <= 1.0 + DOMAIN_TOL {
        Ok(x.clamp(0.0, 1.0))
    } else {
        Err(Error::Domain { x })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn mp(alpha: f64) -> MapSpec {
        MapSpec::manpom(alpha).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(mp(1.0).eval(0.25).unwrap(), 0.25 * (1.0 + 2.0 * 0.25));
        for a in [0.5, 1.0, 2.5, 7.0] {
            assert_eq!(mp(a).eval(0.0).unwrap(), 0.0);
            assert_eq!(mp(a).eval(0.5).unwrap(), 0.0);
            assert_eq!(mp(a).eval(1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn domain_errors_and_clamping() {
        let m = mp(2.0);
        assert_eq!(m.eval(-1e-13).unwrap(), 0.0);
        assert_eq!(m.eval(1.0 + 1e-13).unwrap(), 1.0);
        assert_eq!(m.eval(1.1), Err(Error::Domain { x: 1.1 }));
        assert!(m.eval(-0.01).is_err());
        assert!(m.eval(f64::NAN).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(MapSpec::manpom(0.0).is_err());
        assert!(MapSpec::manpom(-1.0).is_err());
        assert!(MapSpec::manpom_two(1.0, f64::NAN).is_err());
        assert!(MapSpec::by_name("tent", 1.0, 1.0).is_err());
    }

    #[test]
    fn trajectories() {
        // Oracle: hand iteration of x -> x(1+2x) / 2x-1.
        let t = mp(1.0).eval_n(0.6, 4).unwrap();
        let mut x = 0.6f64;
        let mut want = vec![x];
        for _ in 0..4 {
            x = if x < 0.5 { x * (1.0 + 2.0 * x) } else { 2.0 * x - 1.0 };
            want.push(x);
        }
        assert_eq!(t, want);
        assert!((t[2] - 0.28).abs() < 1e-15);
        assert!((t[3] - 0.4368).abs() < 1e-15);
        assert!((t[4] - 0.818_388_48).abs() < 1e-8);

        assert_eq!(mp(3.0).eval_n(0.37, 0).unwrap(), vec![0.37]);
        let d = MapSpec::doubling().eval_n(0.3, 2).unwrap();
        assert_eq!(d[0], 0.3);
        assert!((d[1] - 0.6).abs() < 1e-15 && (d[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn branch_lookup() {
        let m = mp(2.0);
        assert_eq!(m.branch_of(0.3), 0);
        assert_eq!(m.branch_of(0.5), 1);
        assert_eq!(m.branch_of(0.999), 1);
        assert_eq!(m.branch_of(1.0), 1);
    }

    #[test]
    fn distances() {
        let m = mp(2.0);
        assert!((m.dist(0.1, 0.9) - 0.8).abs() < 1e-15);
        let c = mp(2.0).with_metric(Metric::Circle);
        assert!((c.dist(0.1, 0.9) - 0.2).abs() < 1e-15);
        assert_eq!(m.dist(0.42, 0.42), 0.0);
        assert_eq!(c.dist(0.42, 0.42), 0.0);
    }

    #[test]
    fn left_limit_at_half_and_monotone_branches() {
        for a in [0.5, 1.0, 2.0, 4.0, 15.0] {
            let m = mp(a);
            assert!((m.eval(0.5 - 1e-9).unwrap() - 1.0).abs() < 1e-7);
            let mut prev = -1.0;
            for i in 0..500 {
                let v = m.eval(i as f64 / 1000.0).unwrap();
                assert!(v > prev);
                prev = v;
            }
            prev = -1.0;
            for i in 500..=1000 {
                let v = m.eval(i as f64 / 1000.0).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn neutral_fixed_point_derivative() {
        for a in [0.5, 1.0, 2.0, 4.0] {
            let m = mp(a);
            assert_eq!(m.derivative(0.0).unwrap(), 1.0);
            let x = 1e-6;
            let h = 1e-9;
            let fd = (m.eval(x + h).unwrap() - m.eval(x - h).unwrap()) / (2.0 * h);
            assert!((fd - m.derivative(x).unwrap()).abs() < 1e-4);
        }
        let two = MapSpec::manpom_two(2.0, 3.0).unwrap();
        assert_eq!(two.eval(0.0).unwrap(), 0.0);
        assert_eq!(two.eval(1.0).unwrap(), 1.0);
        assert_eq!(two.derivative(0.0).unwrap(), 1.0);
        assert_eq!(two.derivative(1.0).unwrap(), 1.0);
        assert!((two.eval(0.5 - 1e-12).unwrap() - 1.0).abs() < 1e-9);
        assert!(two.eval(0.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_central_differences() {
        let maps = [
            mp(0.5),
            mp(1.0),
            mp(2.5),
            MapSpec::manpom_two(1.5, 3.0).unwrap(),
            MapSpec::doubling(),
        ];
        let mut rng = StreamRng::new(11, 0, 0);
        for m in &maps {
            for _ in 0..1000 {
                let x = loop {
                    let x = rng.uniform_in(1e-6, 1.0 - 1e-6);
                    if (x - 0.5).abs() > 1e-6 {
                        break x;
                    }
                };
                let h = (0.01 * x.min(1.0 - x).min((x - 0.5).abs())).min(1e-5);
                let b = &m.branches()[m.branch_of(x)];
                let fd = (b.value(x + h) - b.value(x - h)) / (2.0 * h);
                let exact = b.derivative(x);
                assert!(
                    ((fd - exact) / exact).abs() < 1e-6,
                    "{m}: x={x} fd={fd} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn branch_inverses() {
        let m = mp(2.0);
        let left = m.branches()[0];
        for y in [1e-9, 0.1, 0.5, 0.9] {
            let x = left.inverse(y).unwrap();
            assert!((left.value(x) - y).abs() < 1e-15);
        }
        assert_eq!(m.branches()[1].inverse(0.5).unwrap(), 0.75);
    }

    #[test]
    fn custom_validation() {
        let ok = MapSpec::custom(vec![
            Branch::new(0.0, 0.5, Formula::Affine { slope: 2.0, offset: 0.0 }),
            Branch::new(0.5, 1.0, Formula::Affine { slope: -2.0, offset: 2.0 }),
        ])
        .unwrap();
        assert!((ok.eval(0.75).unwrap() - 0.5).abs() < 1e-15);
        assert!(!ok.branches()[1].increasing());

        let gap = MapSpec::custom(vec![
            Branch::new(0.0, 0.4, Formula::Affine { slope: 2.0, offset: 0.0 }),
            Branch::new(0.5, 1.0, Formula::Affine { slope: 2.0, offset: -1.0 }),
        ]);
        assert!(matches!(gap, Err(Error::InvalidBranches(_))));

        let escapes = MapSpec::custom(vec![Branch::new(
            0.0,
            1.0,
            Formula::Affine { slope: 3.0, offset: 0.0 },
        )]);
        assert!(matches!(escapes, Err(Error::InvalidBranches(_))));

        let short = MapSpec::custom(vec![Branch::new(
            0.0,
            0.5,
            Formula::Affine { slope: 2.0, offset: 0.0 },
        )]);
        assert!(matches!(short, Err(Error::InvalidBranches(_))));
    }
}
