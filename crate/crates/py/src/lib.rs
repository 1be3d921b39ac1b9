//! Python module `intermittent`: maps, the Ulam operator, renewal sequences
//! and tuple statistics. Results that are records come back as dicts.

use intermittent::inducing::{cylinder_partition, return_time as core_return_time, tail_from_structure, ReturnTime};
use intermittent::renewal::{self, RenewalSeq};
use intermittent::transfer::{self, build_ulam, Mesh};
use intermittent::tuples::{self, DeltaRule, TupleConfig};
use intermittent::{Error, MapSpec, Metric};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

fn err(e: Error) -> PyErr {
    match e {
        Error::NonConvergence { .. } | Error::Censored { .. } | Error::NonPositiveValues { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn record<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &value)
}

/// A piecewise monotone map of [0, 1]: `manpom`, `manpom2` or `doubling`.
#[pyclass(name = "Map", module = "intermittent", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMap {
    inner: MapSpec,
}

#[pymethods]
impl PyMap {
    #[new]
    #[pyo3(signature = (name = "manpom", alpha = 2.0, beta = 2.0, metric = "interval"))]
    fn new(name: &str, alpha: f64, beta: f64, metric: &str) -> PyResult<Self> {
        let metric: Metric = metric.parse().map_err(err)?;
        Ok(Self {
            inner: MapSpec::by_name(name, alpha, beta).map_err(err)?.with_metric(metric),
        })
    }

    #[getter]
    fn alpha(&self) -> Option<f64> {
        self.inner.alpha()
    }

    fn eval(&self, x: f64) -> PyResult<f64> {
        self.inner.eval(x).map_err(err)
    }

    fn derivative(&self, x: f64) -> PyResult<f64> {
        self.inner.derivative(x).map_err(err)
    }

    /// `[x, T x, ..., T^n x]`.
    fn orbit(&self, x: f64, n: usize) -> PyResult<Vec<f64>> {
        self.inner.eval_n(x, n).map_err(err)
    }

    fn dist(&self, x: f64, y: f64) -> f64 {
        self.inner.dist(x, y)
    }

    fn __repr__(&self) -> String {
        format!("Map({})", self.inner)
    }
}

/// `(y, yprime)`: preimages of 1/2 under each branch, indices 0..=n_max.
#[pyfunction]
fn preimages(alpha: f64, n_max: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let rs = cylinder_partition(&MapSpec::manpom(alpha).map_err(err)?, n_max).map_err(err)?;
    Ok((rs.y_seq().to_vec(), rs.yprime_seq().to_vec()))
}

/// First return time to [1/2, 1], or None if it exceeds `cap`.
#[pyfunction]
#[pyo3(signature = (map, y, cap = 100_000_000))]
fn return_time(map: &PyMap, y: f64, cap: u64) -> PyResult<Option<u64>> {
    Ok(match core_return_time(&map.inner, y, cap).map_err(err)? {
        ReturnTime::Returned(n) => Some(n),
        ReturnTime::Censored(_) => None,
    })
}

/// Return-time tail, its fitted exponent and the first-moment verdict.
#[pyfunction]
#[pyo3(signature = (alpha, n_max, window = None))]
fn tail<'py>(py: Python<'py>, alpha: f64, n_max: usize, window: Option<(usize, usize)>) -> PyResult<Bound<'py, PyAny>> {
    let rs = cylinder_partition(&MapSpec::manpom(alpha).map_err(err)?, n_max).map_err(err)?;
    record(py, &tail_from_structure(&rs, window).map_err(err)?)
}

/// Ulam discretisation of the transfer operator on a graded mesh.
#[pyclass(name = "UlamOperator", module = "intermittent", frozen)]
struct PyUlam {
    inner: transfer::UlamOperator,
}

#[pymethods]
impl PyUlam {
    #[new]
    #[pyo3(signature = (map, cells, gamma = None))]
    fn new(py: Python<'_>, map: &PyMap, cells: usize, gamma: Option<f64>) -> PyResult<Self> {
        let map = map.inner.clone();
        let inner = py.detach(|| {
            let mesh = match map.alpha() {
                Some(_) => Mesh::for_manpom(&map, cells, gamma)?,
                None => Mesh::graded(cells, gamma.unwrap_or(1.0))?.with_breakpoints(&[0.5]),
            };
            build_ulam(&map, &mesh)
        });
        Ok(Self { inner: inner.map_err(err)? })
    }

    #[getter]
    fn cells(&self) -> usize {
        self.inner.cells()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    #[getter]
    fn mids(&self) -> Vec<f64> {
        self.inner.mesh().mids()
    }

    #[getter]
    fn widths(&self) -> Vec<f64> {
        self.inner.widths().to_vec()
    }

    /// Row `i` of the transition matrix as `(column, probability)` pairs.
    fn row(&self, i: usize) -> PyResult<Vec<(usize, f64)>> {
        if i >= self.inner.cells() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.row(i))
    }

    /// One step of the transfer operator on per-cell density values.
    fn apply(&self, density: Vec<f64>) -> PyResult<Vec<f64>> {
        transfer::pf_iterate(&self.inner, &density, 1).map_err(err)
    }

    #[pyo3(signature = (tol = 1e-12, max_iter = 10_000))]
    fn invariant_density<'py>(&self, py: Python<'py>, tol: f64, max_iter: usize) -> PyResult<Bound<'py, PyAny>> {
        let h = py.detach(|| transfer::invariant_density(&self.inner, tol, max_iter)).map_err(err)?;
        record(py, &h)
    }

    /// `u_n` for `n = 0..=horizon`.
    fn renewal(&self, py: Python<'_>, horizon: usize) -> PyResult<Vec<f64>> {
        Ok(py.detach(|| renewal::un_operator(&self.inner, horizon)).map_err(err)?.u)
    }
}

/// Monte-Carlo renewal sequence: `(u, stderr)`.
#[pyfunction]
#[pyo3(signature = (map, horizon, samples, seed = 1))]
fn renewal_montecarlo(py: Python<'_>, map: &PyMap, horizon: usize, samples: u64, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let map = map.inner.clone();
    let seq = py.detach(|| renewal::un_montecarlo(&map, horizon, samples, seed)).map_err(err)?;
    Ok((seq.u, seq.stderr.unwrap_or_default()))
}

/// Convergence evidence for `sum u_n^d`.
#[pyfunction]
fn conservativity<'py>(py: Python<'py>, u: Vec<f64>, d: u32) -> PyResult<Bound<'py, PyAny>> {
    let seq = RenewalSeq {
        u,
        method: renewal::Method::Operator,
        stderr: None,
        samples: None,
    };
    record(py, &renewal::conservativity_index(&seq, d).map_err(err)?)
}

fn tuple_config(map: &PyMap, d: usize, horizon: usize, delta: Option<f64>, eps_prox: f64, burn_in: usize, seed: u64) -> TupleConfig {
    TupleConfig::new(map.inner.clone(), d, horizon)
        .with_delta(delta.unwrap_or(tuples::default_delta(d)))
        .with_eps_prox(eps_prox)
        .with_burn_in(burn_in)
        .with_seed(seed)
}

/// Orbit statistics of one tuple plus its classification.
#[pyfunction]
#[pyo3(signature = (map, x, horizon, delta = None, eps_prox = 1e-3, burn_in = 0))]
fn simulate_tuple<'py>(
    py: Python<'py>,
    map: &PyMap,
    x: Vec<f64>,
    horizon: usize,
    delta: Option<f64>,
    eps_prox: f64,
    burn_in: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = tuple_config(map, x.len(), horizon, delta, eps_prox, burn_in, 0);
    let stats = py.detach(|| tuples::simulate_tuple(&cfg, &x)).map_err(err)?;
    let out = record(py, &stats)?;
    out.set_item("flags", record(py, &tuples::classify(&stats, cfg.delta, cfg.eps_prox))?)?;
    Ok(out)
}

/// One phase-diagram row from `samples` uniform tuples.
#[pyfunction]
#[pyo3(signature = (map, d, horizon, samples, delta = None, eps_prox = 1e-3, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn measure_estimate<'py>(
    py: Python<'py>,
    map: &PyMap,
    d: usize,
    horizon: usize,
    samples: u64,
    delta: Option<f64>,
    eps_prox: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = tuple_config(map, d, horizon, delta, eps_prox, 0, seed);
    let row = py.detach(|| tuples::measure_estimate(&cfg, samples)).map_err(err)?;
    record(py, &row)
}

/// Phase diagram over Manneville-Pomeau exponents and tuple sizes.
#[pyfunction]
#[pyo3(signature = (alphas, ds, horizon, samples, seed = 1, delta = None))]
fn phase_sweep<'py>(
    py: Python<'py>,
    alphas: Vec<f64>,
    ds: Vec<usize>,
    horizon: usize,
    samples: u64,
    seed: u64,
    delta: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let rule = delta.map_or(DeltaRule::Default, DeltaRule::Fixed);
    let diagram = py
        .detach(|| tuples::phase_sweep(&alphas, &ds, rule, horizon, samples, seed))
        .map_err(err)?;
    record(py, &diagram.rows)
}

/// One-step expansion test on pairs at distance at most 1/3.
#[pyfunction]
#[pyo3(signature = (alpha, trials, seed = 1))]
fn expansivity_check<'py>(py: Python<'py>, alpha: f64, trials: u64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let map = MapSpec::manpom(alpha).map_err(err)?;
    let report = py.detach(|| tuples::expansivity_check(&map, trials, seed)).map_err(err)?;
    record(py, &report)
}

#[pymodule]
#[pyo3(name = "intermittent")]
fn intermittent_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMap>()?;
    m.add_class::<PyUlam>()?;
    m.add_function(wrap_pyfunction!(preimages, m)?)?;
    m.add_function(wrap_pyfunction!(return_time, m)?)?;
    m.add_function(wrap_pyfunction!(tail, m)?)?;
    m.add_function(wrap_pyfunction!(renewal_montecarlo, m)?)?;
    m.add_function(wrap_pyfunction!(conservativity, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_tuple, m)?)?;
    m.add_function(wrap_pyfunction!(measure_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(phase_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(expansivity_check, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
