//! Python bindings: windows, capacities, equilibrium measures, sampling and the
//! comparison bundles. Structured results come back as plain dicts and lists.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use interlacement::config::{RunConfig, WindowSpec};
use interlacement::lattice::{CompactSet, LatticePoint};
use interlacement::pipeline::{self, Which};
use interlacement::potential::{solve_window, SolverParams};
use interlacement::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Config { .. } | Error::DomainTooSmall { .. } | Error::BoxTooLarge { .. } | Error::DimensionMismatch { .. } => {
            PyValueError::new_err(err.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Serializes through JSON and parses with Python's `json` module.
fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn point_tuple(p: &LatticePoint) -> Vec<i32> {
    p.coords().to_vec()
}

/// A finite set of lattice points in `Z^d`.
#[pyclass(name = "CompactSet", frozen)]
struct PyCompactSet {
    inner: Arc<CompactSet>,
}

#[pymethods]
impl PyCompactSet {
    /// Explicit list of points, each a sequence of `d` integers.
    #[new]
    #[pyo3(signature = (points, dimension = 3))]
    fn new(points: Vec<Vec<i32>>, dimension: usize) -> PyResult<Self> {
        let spec = WindowSpec::Points { points };
        Ok(PyCompactSet { inner: Arc::new(spec.build(dimension, "points").map_err(to_py)?) })
    }

    /// All points between two corners, inclusive.
    #[staticmethod]
    fn cuboid(lo: Vec<i32>, hi: Vec<i32>) -> PyResult<Self> {
        let dim = lo.len();
        let spec = WindowSpec::Cuboid { lo, hi };
        Ok(PyCompactSet { inner: Arc::new(spec.build(dim, "cuboid").map_err(to_py)?) })
    }

    /// All points with squared norm at most `radius2`.
    #[staticmethod]
    #[pyo3(signature = (radius2, dimension = 3))]
    fn ball(radius2: i64, dimension: usize) -> PyResult<Self> {
        let spec = WindowSpec::Ball { radius2 };
        Ok(PyCompactSet { inner: Arc::new(spec.build(dimension, "ball").map_err(to_py)?) })
    }

    #[staticmethod]
    #[pyo3(signature = (dimension = 3))]
    fn empty(dimension: usize) -> Self {
        PyCompactSet { inner: Arc::new(CompactSet::empty(dimension)) }
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dim()
    }

    /// Largest squared norm of a point in the set.
    #[getter]
    fn radius_bound(&self) -> i64 {
        self.inner.radius_bound()
    }

    fn points(&self) -> Vec<Vec<i32>> {
        self.inner.points().iter().map(point_tuple).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, point: Vec<i32>) -> bool {
        point.len() == self.inner.dim() && self.inner.contains(&LatticePoint::new(&point))
    }

    fn __repr__(&self) -> String {
        format!("CompactSet(dimension={}, len={})", self.inner.dim(), self.inner.len())
    }
}

fn solver_params(radius: u32, tol: f64) -> PyResult<SolverParams> {
    if radius == 0 || !(tol > 0.0) {
        return Err(PyValueError::new_err("radius and tol must be positive"));
    }
    Ok(SolverParams { radius, tol, ..SolverParams::default() })
}

/// Capacity report for `window`: values at radii `R` and `2R` and the extrapolated capacity.
#[pyfunction]
#[pyo3(signature = (window, radius = 12, tol = 1e-8))]
fn capacity(py: Python<'_>, window: &PyCompactSet, radius: u32, tol: f64) -> PyResult<Py<PyAny>> {
    let params = solver_params(radius, tol)?;
    let target = Arc::clone(&window.inner);
    let sol = py.detach(|| solve_window(&target, &params)).map_err(to_py)?;
    to_object(py, &sol.capacity)
}

/// Equilibrium measure as a dict mapping point tuples to weights.
#[pyfunction]
#[pyo3(signature = (window, radius = 12, tol = 1e-8))]
fn equilibrium_measure<'py>(py: Python<'py>, window: &PyCompactSet, radius: u32, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    let params = solver_params(radius, tol)?;
    let target = Arc::clone(&window.inner);
    let sol = py.detach(|| solve_window(&target, &params)).map_err(to_py)?;
    let out = PyDict::new(py);
    for (p, w) in sol.measure.points.iter().zip(&sol.measure.weights) {
        out.set_item(pyo3::types::PyTuple::new(py, p.coords())?, *w)?;
    }
    Ok(out)
}

/// A run configuration, loaded from TOML or JSON text.
#[pyclass(name = "RunConfig")]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyRunConfig { inner: RunConfig::from_toml_str(text).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyRunConfig { inner: RunConfig::from_json_str(text).map_err(to_py)? })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(to_py)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn level(&self) -> f64 {
        self.inner.level
    }

    #[setter]
    fn set_level(&mut self, level: f64) -> PyResult<()> {
        let mut next = self.inner.clone();
        next.level = level;
        next.validate().map_err(to_py)?;
        self.inner = next;
        Ok(())
    }

    #[getter]
    fn runs(&self) -> u64 {
        self.inner.sampling.runs
    }

    #[setter]
    fn set_runs(&mut self, runs: u64) {
        self.inner.sampling.runs = runs;
    }

    #[getter]
    fn config_hash(&self) -> String {
        self.inner.hash()
    }

    fn window(&self) -> PyResult<PyCompactSet> {
        Ok(PyCompactSet { inner: self.inner.window().map_err(to_py)? })
    }
}

#[derive(Serialize)]
struct SampleOutput<'a> {
    capacity: f64,
    stats: &'a interlacement::ensemble::EnsembleStats,
    samples: &'a [interlacement::ensemble::RunRecord],
}

/// Samples with `construction` ("classical" or "twosided"); returns pooled statistics
/// and the per-run records.
#[pyfunction]
fn sample(py: Python<'_>, config: &PyRunConfig, construction: &str) -> PyResult<Py<PyAny>> {
    let which = match construction {
        "classical" => Which::Classical,
        "twosided" => Which::TwoSided,
        other => return Err(PyValueError::new_err(format!("unknown construction {other:?}"))),
    };
    let cfg = config.inner.clone();
    let (prep, stats) = py.detach(|| pipeline::sample(&cfg, which)).map_err(to_py)?;
    to_object(py, &SampleOutput { capacity: prep.capacity(), stats: &stats, samples: &stats.records })
}

/// Runs the classical/two-sided comparison bundle.
#[pyfunction]
fn compare(py: Python<'_>, config: &PyRunConfig) -> PyResult<Py<PyAny>> {
    let cfg = config.inner.clone();
    let bundle = py.detach(|| pipeline::compare(&cfg)).map_err(to_py)?;
    to_object(py, &bundle)
}

/// Runs the time-reversal bundle for both constructions.
#[pyfunction]
fn reversal(py: Python<'_>, config: &PyRunConfig) -> PyResult<Py<PyAny>> {
    let cfg = config.inner.clone();
    let bundle = py.detach(|| pipeline::reversal(&cfg)).map_err(to_py)?;
    to_object(py, &bundle)
}

#[pymodule(name = "interlacement")]
fn interlacement_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCompactSet>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_function(wrap_pyfunction!(capacity, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium_measure, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(reversal, m)?)?;
    Ok(())
}
