//! Python bindings. Specs, reports and experiment configs cross the boundary
//! as JSON-shaped dicts, so the Python side sees the same schema as the CLI.

use std::sync::Arc;

use bpve_core::conditions::{self, ConditionReport};
use bpve_core::distributions::{OffspringDistribution, Phi};
use bpve_core::environment::{self, EnvironmentSpec, QuenchedEnvironment};
use bpve_core::estimators::{self, EnvSource, RunSettings};
use bpve_core::experiment::{self, ExperimentConfig};
use bpve_core::rng::{stream, Domain};
use bpve_core::simulate::simulate_trajectory;
use bpve_core::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Json(_) | Error::InvalidInput(_) | Error::InvalidDistribution(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn json_text(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    match obj.extract::<String>() {
        Ok(s) => Ok(s),
        Err(_) => obj.py().import("json")?.call_method1("dumps", (obj,))?.extract(),
    }
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    serde_json::from_str(&json_text(obj)?).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "OffspringDistribution", frozen)]
struct PyDistribution(Arc<OffspringDistribution>);

#[pymethods]
impl PyDistribution {
    /// Builds a law from a dict or JSON string such as
    /// `{"kind": "geometric", "mean": 2.0}`.
    #[new]
    fn new(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(Self(Arc::new(from_py(spec)?)))
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean()
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance()
    }

    fn pmf(&self, k: u64) -> f64 {
        self.0.pmf(k)
    }

    fn pgf(&self, s: f64) -> f64 {
        self.0.pgf(s)
    }

    fn log_mean(&self) -> PyResult<f64> {
        self.0.log_mean().map_err(py_err)
    }

    fn normalized_variance(&self) -> f64 {
        self.0.normalized_variance()
    }

    fn delta_moment(&self, delta: f64) -> f64 {
        self.0.delta_moment(delta)
    }

    fn kersting_a_term(&self) -> PyResult<f64> {
        self.0.kersting_a_term().map_err(py_err)
    }

    fn extinction_probability(&self) -> f64 {
        self.0.extinction_prob_constant_env()
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<PyObject> {
        to_py(py, &*self.0)
    }

    fn __repr__(&self) -> String {
        format!("OffspringDistribution({})", serde_json::to_string(&*self.0).unwrap_or_default())
    }
}

#[pyclass(name = "Environment", frozen)]
struct PyEnvironment(Arc<QuenchedEnvironment>);

#[pymethods]
impl PyEnvironment {
    /// Fixed environment of `horizon` generations drawn from `spec` (a dict,
    /// JSON string or preset name) with `env_seed`.
    #[staticmethod]
    #[pyo3(signature = (spec, horizon, env_seed = 0))]
    fn quench(spec: &Bound<'_, PyAny>, horizon: usize, env_seed: u64) -> PyResult<Self> {
        let spec = resolve_spec(spec)?;
        Ok(Self(Arc::new(environment::quench(&spec, env_seed, horizon).map_err(py_err)?)))
    }

    #[staticmethod]
    fn constant(dist: &PyDistribution, horizon: usize) -> PyResult<Self> {
        let dists = vec![dist.0.clone(); horizon];
        Ok(Self(Arc::new(QuenchedEnvironment::from_distributions(dists).map_err(py_err)?)))
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.0.horizon()
    }

    #[getter]
    fn digest(&self) -> &str {
        self.0.digest()
    }

    fn dist(&self, i: usize) -> PyResult<PyDistribution> {
        check_generation(&self.0, i)?;
        Ok(PyDistribution(self.0.dist(i).clone()))
    }

    fn log_mean(&self, i: usize) -> PyResult<f64> {
        check_generation(&self.0, i)?;
        Ok(self.0.log_mean(i))
    }

    fn zeta(&self, i: usize) -> PyResult<f64> {
        check_generation(&self.0, i)?;
        Ok(self.0.zeta(i))
    }

    /// `S_0, ..., S_horizon`.
    fn s(&self) -> Vec<f64> {
        self.0.s_prefix().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.horizon()
    }
}

fn check_generation(env: &QuenchedEnvironment, i: usize) -> PyResult<()> {
    if i == 0 || i > env.horizon() {
        return Err(PyValueError::new_err(format!("generation {i} is outside 1..={}", env.horizon())));
    }
    Ok(())
}

fn resolve_spec(spec: &Bound<'_, PyAny>) -> PyResult<EnvironmentSpec> {
    if let Ok(name) = spec.extract::<String>() {
        if let Some(p) = environment::preset(&name) {
            return Ok(p);
        }
    }
    from_py(spec)
}

#[pyfunction]
fn presets() -> Vec<String> {
    environment::presets().into_iter().map(|p| p.name.to_string()).collect()
}

#[pyfunction]
#[pyo3(signature = (env, l = 1, horizon = None, tol = 1e-9))]
fn a_l(py: Python<'_>, env: &PyEnvironment, l: usize, horizon: Option<usize>, tol: f64) -> PyResult<PyObject> {
    let h = series_horizon(&env.0, l, horizon);
    report(py, py.allow_threads(|| conditions::a_l(&env.0, l, h, tol)))
}

#[pyfunction]
#[pyo3(signature = (env, delta, l = 1, horizon = None, tol = 1e-9))]
fn a_l_delta(py: Python<'_>, env: &PyEnvironment, delta: f64, l: usize, horizon: Option<usize>, tol: f64) -> PyResult<PyObject> {
    let h = series_horizon(&env.0, l, horizon);
    report(py, py.allow_threads(|| conditions::a_l_delta(&env.0, l, delta, h, tol)))
}

/// `phi` is a dict such as `{"kind": "log_power", "gamma": 0.25}`.
#[pyfunction]
#[pyo3(signature = (env, phi, l = 1, horizon = None, tol = 1e-9))]
fn a_l_psi(
    py: Python<'_>,
    env: &PyEnvironment,
    phi: &Bound<'_, PyAny>,
    l: usize,
    horizon: Option<usize>,
    tol: f64,
) -> PyResult<PyObject> {
    let phi: Phi = from_py(phi)?;
    let h = series_horizon(&env.0, l, horizon);
    report(py, py.allow_threads(|| conditions::a_l_psi(&env.0, l, &phi, h, tol)))
}

#[pyfunction]
#[pyo3(signature = (env, horizon = None))]
fn jagers_criterion(py: Python<'_>, env: &PyEnvironment, horizon: Option<usize>) -> PyResult<PyObject> {
    report(py, conditions::jagers_criterion(&env.0, horizon.unwrap_or(env.0.horizon())))
}

#[pyfunction]
#[pyo3(signature = (env, horizon = None))]
fn kersting_condition_a(py: Python<'_>, env: &PyEnvironment, horizon: Option<usize>) -> PyResult<PyObject> {
    report(py, conditions::kersting_condition_a(&env.0, horizon.unwrap_or(env.0.horizon())))
}

fn series_horizon(env: &QuenchedEnvironment, l: usize, horizon: Option<usize>) -> usize {
    horizon.unwrap_or_else(|| env.horizon().saturating_sub(l))
}

fn report(py: Python<'_>, r: bpve_core::Result<ConditionReport>) -> PyResult<PyObject> {
    to_py(py, &r.map_err(py_err)?)
}

/// One trajectory; returns `(log_z, log_w)` lists of length `n + 1`.
#[pyfunction]
#[pyo3(signature = (env, n, z0 = 1, seed = 0, replica = 0))]
fn simulate(env: &PyEnvironment, n: usize, z0: u128, seed: u64, replica: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let mut rng = stream(seed, Domain::Path, replica);
    let t = simulate_trajectory(&env.0, z0, n, &mut rng, bpve_core::distributions::DEFAULT_CAP).map_err(py_err)?;
    Ok((t.z.iter().map(|p| p.ln()).collect(), t.log_w))
}

/// Monte Carlo `P(Z_n > 0)` in a fixed environment.
#[pyfunction]
#[pyo3(signature = (env, n, replicas, z0 = 1, seed = 0))]
fn mc_survival(py: Python<'_>, env: &PyEnvironment, n: usize, replicas: u64, z0: u128, seed: u64) -> PyResult<PyObject> {
    let source = EnvSource::Quenched(env.0.clone());
    let est = py
        .allow_threads(|| estimators::mc_survival(&source, z0, n, &RunSettings::new(replicas, seed)))
        .map_err(py_err)?;
    to_py(py, &est)
}

/// Runs an experiment config (dict or JSON string) and returns the results
/// document.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<PyObject> {
    let config = ExperimentConfig::from_json(&json_text(config)?).map_err(py_err)?;
    let out = py
        .allow_threads(|| experiment::run(&config))
        .map_err(py_err)?;
    to_py(py, &out.results_json())
}

#[pymodule]
fn bpve(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyEnvironment>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(a_l, m)?)?;
    m.add_function(wrap_pyfunction!(a_l_delta, m)?)?;
    m.add_function(wrap_pyfunction!(a_l_psi, m)?)?;
    m.add_function(wrap_pyfunction!(jagers_criterion, m)?)?;
    m.add_function(wrap_pyfunction!(kersting_condition_a, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(mc_survival, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
