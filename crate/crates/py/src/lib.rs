//! Python bindings. Reports cross the boundary as plain dicts.

use corrbern::experiment::{run_experiment, ExperimentConfig, ExperimentMode, ExperimentSummary, ParamStream};
use corrbern::linsys::{degenerate_delta_report, expectation_polynomial};
use corrbern::oracle::alignment_report;
use corrbern::verify::{run_verify, VerifyLevel};
use corrbern::{Builtin, GraphPair, Statistic};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn err(e: corrbern::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn builtin(name: &str) -> PyResult<Builtin> {
    name.parse().map_err(err)
}

fn pair(x: &str, y: &str) -> PyResult<GraphPair> {
    GraphPair::parse(x, y).map_err(err)
}

#[pyclass(name = "ModelParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: corrbern::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    fn new(p: Vec<f64>, rho: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: corrbern::ModelParams::new(p, rho).map_err(err)?,
        })
    }

    #[staticmethod]
    fn homogeneous(n: usize, p: f64, rho: f64) -> PyResult<Self> {
        Ok(Self {
            inner: corrbern::ModelParams::homogeneous(n, p, rho).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: corrbern::ModelParams::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.inner.p().to_vec()
    }

    #[getter]
    fn rho(&self) -> Vec<f64> {
        self.inner.rho().to_vec()
    }

    #[getter]
    fn n_components(&self) -> usize {
        self.inner.n_components()
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(p={:?}, rho={:?})", self.inner.p(), self.inner.rho())
    }
}

/// `(q1, q0, qstar)` for one component.
#[pyfunction]
fn cell_probs(p: f64, rho: f64) -> PyResult<(f64, f64, f64)> {
    let c = corrbern::cell_probs(p, rho).map_err(err)?;
    Ok((c.q1, c.q0, c.qstar))
}

/// Draws `n_samples` pairs as `(x_bits, y_bits)` strings.
#[pyfunction]
#[pyo3(signature = (params, n_samples, seed=0))]
fn sample(params: &PyModelParams, n_samples: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| {
            let p = corrbern::sample_pair(&params.inner, &mut rng);
            (p.x_string(), p.y_string())
        })
        .collect()
}

#[pyfunction]
fn statistic_names() -> Vec<&'static str> {
    Builtin::ALL.iter().map(|b| b.as_str()).collect()
}

/// Value of a named statistic at the point `(x, y)`, given as 0/1 strings.
#[pyfunction]
fn statistic(name: &str, x: &str, y: &str) -> PyResult<f64> {
    Ok(builtin(name)?.eval(&pair(x, y)?))
}

/// Every named statistic at `(x, y)`.
#[pyfunction]
fn estimate(x: &str, y: &str) -> PyResult<Vec<(&'static str, f64)>> {
    let p = pair(x, y)?;
    Ok(Builtin::ALL.iter().map(|b| (b.as_str(), b.eval(&p))).collect())
}

/// `(mean, variance)` of a named statistic by exact enumeration.
#[pyfunction]
fn exact_moments(py: Python<'_>, name: &str, params: &PyModelParams) -> PyResult<(f64, f64)> {
    let b = builtin(name)?;
    let m = py.detach(|| corrbern::exact_moments(&b, &params.inner)).map_err(err)?;
    Ok((m.mean, m.variance))
}

#[pyfunction]
fn exact_report<'py>(py: Python<'py>, params: &PyModelParams) -> PyResult<Bound<'py, PyAny>> {
    let r = py.detach(|| alignment_report(&params.inner)).map_err(err)?;
    to_py(py, &r)
}

/// Coefficients of `E(stat)` in `p_1..p_n` when every `rho_i` is zero.
#[pyfunction]
fn expectation_poly(name: &str, n: usize) -> PyResult<Vec<f64>> {
    let poly = expectation_polynomial(&builtin(name)?, n).map_err(err)?;
    Ok(poly.coeffs().to_vec())
}

#[pyfunction]
#[pyo3(signature = (mu=0.25, p_values=vec![0.15, 0.35]))]
fn degenerate<'py>(py: Python<'py>, mu: f64, p_values: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &degenerate_delta_report(mu, &p_values).map_err(err)?)
}

/// Returns `(rows, summary)`.
#[pyfunction]
#[pyo3(signature = (mode="uniform-both", replicates=200, n=6, seed=0, stream="child-seeds"))]
fn experiment<'py>(
    py: Python<'py>,
    mode: &str,
    replicates: usize,
    n: usize,
    seed: u64,
    stream: &str,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let config = ExperimentConfig {
        mode: mode.parse::<ExperimentMode>().map_err(err)?,
        replicates,
        n_components: n,
        base_seed: seed,
        stream: stream.parse::<ParamStream>().map_err(err)?,
    };
    let rows = py.detach(|| run_experiment(&config)).map_err(err)?;
    let summary = ExperimentSummary::of(&config, &rows);
    Ok((to_py(py, &rows)?, to_py(py, &summary)?))
}

/// Runs the self-check suite; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (level="fast"))]
fn verify<'py>(py: Python<'py>, level: &str) -> PyResult<Bound<'py, PyAny>> {
    let level: VerifyLevel = level.parse().map_err(err)?;
    let report = py.detach(|| run_verify(level));
    to_py(py, &report)
}

#[pymodule]
#[pyo3(name = "corrbern")]
fn corrbern_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_function(wrap_pyfunction!(cell_probs, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(statistic_names, m)?)?;
    m.add_function(wrap_pyfunction!(statistic, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(exact_moments, m)?)?;
    m.add_function(wrap_pyfunction!(exact_report, m)?)?;
    m.add_function(wrap_pyfunction!(expectation_poly, m)?)?;
    m.add_function(wrap_pyfunction!(degenerate, m)?)?;
    m.add_function(wrap_pyfunction!(experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
