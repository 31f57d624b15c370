//! Python bindings: score distributions, posterior curves, the eight
//! recalibration methods and scenario runs.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use recal_core::auc;
use recal_core::dist;
use recal_core::eval::{self, Functional, TabulatedConcave};
use recal_core::methods::{self, MethodId};
use recal_core::runner;
use recal_core::scenario::Scenario;
use recal_core::solvers::SolverConfig;
use recal_core::RecalError;

fn to_py(err: RecalError) -> PyErr {
    match err {
        RecalError::NoRoot { .. } | RecalError::Infeasible { .. } => PyRuntimeError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "DiscreteScoreDist", frozen, from_py_object)]
#[derive(Clone)]
struct PyDist(dist::DiscreteScoreDist);

#[pymethods]
impl PyDist {
    #[new]
    fn new(support: Vec<f64>, probs: Vec<f64>) -> PyResult<Self> {
        dist::DiscreteScoreDist::new(support, probs).map(Self).map_err(to_py)
    }

    /// Builds a pmf from non-negative weights by normalising them.
    #[staticmethod]
    fn from_weights(support: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        dist::DiscreteScoreDist::from_weights(support, weights)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn support(&self) -> Vec<f64> {
        self.0.support().to_vec()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.probs().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("DiscreteScoreDist(len={})", self.0.len())
    }
}

#[pyclass(name = "PosteriorCurve", frozen, from_py_object)]
#[derive(Clone)]
struct PyCurve(dist::PosteriorCurve);

#[pymethods]
impl PyCurve {
    #[new]
    fn new(support: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        dist::PosteriorCurve::new(support, values).map(Self).map_err(to_py)
    }

    #[getter]
    fn support(&self) -> Vec<f64> {
        self.0.support().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "SourceModel", frozen, from_py_object)]
#[derive(Clone)]
struct PySource(dist::SourceModel);

#[pymethods]
impl PySource {
    #[new]
    fn new(dist: &PyDist, posterior: &PyCurve) -> PyResult<Self> {
        dist::SourceModel::new(dist.0.clone(), posterior.0.clone())
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_class_conditionals(class0: &PyDist, class1: &PyDist, prior: f64) -> PyResult<Self> {
        dist::SourceModel::from_class_conditionals(&class0.0, &class1.0, prior)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn feature_dist(&self) -> PyDist {
        PyDist(self.0.feature_dist().clone())
    }

    #[getter]
    fn posterior(&self) -> PyCurve {
        PyCurve(self.0.posterior().clone())
    }

    #[getter]
    fn prior(&self) -> f64 {
        self.0.prior()
    }

    fn implied_auc(&self) -> PyResult<f64> {
        auc::implied_auc(self.0.feature_dist(), self.0.posterior()).map_err(to_py)
    }
}

#[pyclass(name = "TargetSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyTarget(dist::TargetSpec);

#[pymethods]
impl PyTarget {
    #[new]
    fn new(dist: &PyDist, prior: f64) -> PyResult<Self> {
        dist::TargetSpec::new(dist.0.clone(), prior).map(Self).map_err(to_py)
    }

    #[getter]
    fn feature_dist(&self) -> PyDist {
        PyDist(self.0.feature_dist().clone())
    }

    #[getter]
    fn prior(&self) -> f64 {
        self.0.prior()
    }
}

#[pyclass(name = "RecalResult", frozen)]
struct PyRecalResult(methods::RecalResult);

#[pymethods]
impl PyRecalResult {
    #[getter]
    fn method(&self) -> &'static str {
        self.0.method.name()
    }

    #[getter]
    fn posterior(&self) -> PyCurve {
        PyCurve(self.0.posterior.clone())
    }

    #[getter]
    fn achieved_mean(&self) -> f64 {
        self.0.achieved_mean
    }

    #[getter]
    fn implied_auc(&self) -> f64 {
        self.0.implied_auc
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.diagnostics.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.diagnostics.iterations
    }

    /// Fitted parameters that apply to this method (`t`, `rho`, `a`, `b`, `c`).
    #[getter]
    fn params(&self) -> BTreeMap<&'static str, f64> {
        let p = self.0.params;
        [("t", p.t), ("rho", p.rho), ("a", p.a), ("b", p.b), ("c", p.c)]
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "RecalResult(method={}, mean={:.6}, auc={:.6}, converged={})",
            self.0.method, self.0.achieved_mean, self.0.implied_auc, self.0.diagnostics.converged
        )
    }
}

#[pyfunction]
#[pyo3(signature = (trials, success_prob, support=None))]
fn binomial_dist(trials: u32, success_prob: f64, support: Option<Vec<f64>>) -> PyResult<PyDist> {
    dist::binomial_dist(trials, success_prob, support)
        .map(PyDist)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (trials, mean, correlation, quad_nodes=dist::DEFAULT_QUAD_NODES))]
fn vasicek_mixture_dist(trials: u32, mean: f64, correlation: f64, quad_nodes: usize) -> PyResult<PyDist> {
    dist::vasicek_mixture_dist(trials, mean, correlation, quad_nodes)
        .map(PyDist)
        .map_err(to_py)
}

#[pyfunction]
fn mean_under(dist: &PyDist, curve: &PyCurve) -> PyResult<f64> {
    dist::mean_under(&dist.0, &curve.0).map_err(to_py)
}

#[pyfunction]
fn implied_auc(dist: &PyDist, curve: &PyCurve) -> PyResult<f64> {
    auc::implied_auc(&dist.0, &curve.0).map_err(to_py)
}

/// Mann-Whitney AUC of the support values themselves as a score.
#[pyfunction]
fn mann_whitney_auc(dist: &PyDist, curve: &PyCurve) -> PyResult<f64> {
    let cc = auc::class_conditionals(&dist.0, &curve.0).map_err(to_py)?;
    Ok(auc::mann_whitney_auc(&cc))
}

#[pyfunction]
fn adjusted_cdf(dist: &PyDist) -> Vec<f64> {
    auc::adjusted_cdf(&dist.0)
}

fn functional_from(grid: Option<Vec<f64>>, values: Option<Vec<f64>>) -> PyResult<Functional> {
    match (grid, values) {
        (None, None) => Ok(Functional::Sqrt),
        (Some(g), Some(v)) => TabulatedConcave::new(g, v).map(Functional::Tabulated).map_err(to_py),
        _ => Err(PyValueError::new_err("grid and values must be given together")),
    }
}

/// `E[C(eta)]` with `C = sqrt`, or a tabulated concave `C` when `grid` and
/// `values` are given.
#[pyfunction]
#[pyo3(signature = (dist, curve, grid=None, values=None))]
fn functional_mean(dist: &PyDist, curve: &PyCurve, grid: Option<Vec<f64>>, values: Option<Vec<f64>>) -> PyResult<f64> {
    let c = functional_from(grid, values)?;
    eval::functional_mean(&dist.0, &curve.0, &c).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (q, grid=None, values=None))]
fn functional_bounds(q: f64, grid: Option<Vec<f64>>, values: Option<Vec<f64>>) -> PyResult<(f64, f64)> {
    let c = functional_from(grid, values)?;
    eval::functional_bounds(q, &c).map_err(to_py)
}

fn config(tol_mean: Option<f64>, tol_auc: Option<f64>, max_iter: Option<usize>) -> SolverConfig {
    let mut cfg = SolverConfig::default();
    if let Some(t) = tol_mean {
        cfg.tol_mean = t;
    }
    if let Some(t) = tol_auc {
        cfg.tol_auc = t;
    }
    if let Some(n) = max_iter {
        cfg.max_iter = n;
    }
    cfg
}

/// Runs one method by name, e.g. `"fjs"` or `"two_param_qmm"`.
#[pyfunction]
#[pyo3(signature = (method, source, target, tol_mean=None, tol_auc=None, max_iter=None))]
fn recalibrate(
    py: Python<'_>,
    method: &str,
    source: &PySource,
    target: &PyTarget,
    tol_mean: Option<f64>,
    tol_auc: Option<f64>,
    max_iter: Option<usize>,
) -> PyResult<PyRecalResult> {
    let m: MethodId = method.parse().map_err(to_py)?;
    let cfg = config(tol_mean, tol_auc, max_iter);
    let (src, tgt) = (&source.0, &target.0);
    py.detach(|| methods::recalibrate(m, src, tgt, &cfg))
        .map(PyRecalResult)
        .map_err(to_py)
}

#[pyfunction]
fn method_names() -> Vec<&'static str> {
    MethodId::ALL.iter().map(|m| m.name()).collect()
}

/// Runs a scenario given as JSON text. Returns a dict with the table CSV,
/// the curves CSV, the diagnostics JSON and the CLI exit code.
#[pyfunction]
fn run_scenario_json(py: Python<'_>, text: &str) -> PyResult<BTreeMap<&'static str, Py<PyAny>>> {
    let scenario = Scenario::from_json_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let resolved = scenario.resolve().map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = py.detach(|| runner::run_scenario(&resolved)).map_err(to_py)?;
    let mut map = BTreeMap::new();
    map.insert("table_csv", out.table.to_csv().into_pyobject(py)?.into_any().unbind());
    map.insert("curves_csv", out.curves.to_csv().into_pyobject(py)?.into_any().unbind());
    map.insert("diagnostics_json", out.diagnostics_json().into_pyobject(py)?.into_any().unbind());
    map.insert("exit_code", out.exit_code().into_pyobject(py)?.into_any().unbind());
    Ok(map)
}

#[pymodule]
pub fn recal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDist>()?;
    m.add_class::<PyCurve>()?;
    m.add_class::<PySource>()?;
    m.add_class::<PyTarget>()?;
    m.add_class::<PyRecalResult>()?;
    m.add_function(wrap_pyfunction!(binomial_dist, m)?)?;
    m.add_function(wrap_pyfunction!(vasicek_mixture_dist, m)?)?;
    m.add_function(wrap_pyfunction!(mean_under, m)?)?;
    m.add_function(wrap_pyfunction!(implied_auc, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney_auc, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(functional_mean, m)?)?;
    m.add_function(wrap_pyfunction!(functional_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(recalibrate, m)?)?;
    m.add_function(wrap_pyfunction!(method_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_json, m)?)?;
    Ok(())
}
