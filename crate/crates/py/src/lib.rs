//! Python bindings. Structured results come back as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use caging_core::eval::{self, GenerationConfig, Metric, ScoreRequest, ScoreSettings};
use caging_core::metrics::{self, EscapeConfig};
use caging_core::planner::PlannerKind;
use caging_core::scenarios::{make_scenario, ScenarioConfig, SCENARIO_NAMES};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(runtime_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Default config of `scenario`, or `config_json` parsed as a scenario config.
fn scenario_config(scenario: &str, config_json: Option<&str>) -> PyResult<ScenarioConfig> {
    match config_json {
        Some(text) => serde_json::from_str(text).map_err(value_err),
        None => ScenarioConfig::default_for(scenario).ok_or_else(|| {
            value_err(format!(
                "unknown scenario {scenario:?}; valid scenarios: {}",
                SCENARIO_NAMES.join(", ")
            ))
        }),
    }
}

#[pyfunction]
pub fn scenario_names() -> Vec<&'static str> {
    SCENARIO_NAMES.to_vec()
}

#[pyfunction]
pub fn default_config(py: Python<'_>, scenario: &str) -> PyResult<Py<PyAny>> {
    to_py(py, &scenario_config(scenario, None)?)
}

/// One scripted run recorded as a labeled trajectory.
#[pyfunction]
#[pyo3(signature = (scenario, seed=0, k_frames=10, k_hat=3, config_json=None))]
pub fn simulate(
    py: Python<'_>,
    scenario: &str,
    seed: u64,
    k_frames: usize,
    k_hat: usize,
    config_json: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let cfg = scenario_config(scenario, config_json)?;
    let id = format!("{}-seed{seed}", cfg.name());
    let rec = py
        .detach(|| eval::simulate_record(&id, &cfg, seed, k_frames, k_hat))
        .map_err(runtime_err)?;
    to_py(py, &rec)
}

#[pyfunction]
#[pyo3(signature = (scenario, n_traj=50, seed=0, k_frames=10, k_hat=3))]
pub fn generate(
    py: Python<'_>,
    scenario: &str,
    n_traj: usize,
    seed: u64,
    k_frames: usize,
    k_hat: usize,
) -> PyResult<Py<PyAny>> {
    let cfg = scenario_config(scenario, None)?;
    let gen = GenerationConfig {
        n_traj,
        k_frames,
        k_hat,
        seed,
    };
    gen.validate().map_err(value_err)?;
    let d = py
        .detach(|| eval::generate_dataset(&cfg, &gen))
        .map_err(runtime_err)?;
    to_py(py, &d.records)
}

/// Scores every frame of the records in a JSON-lines dataset file.
#[pyfunction]
#[pyo3(signature = (dataset_path, metrics, m=100, lam=1.0, seed=0))]
pub fn score(
    py: Python<'_>,
    dataset_path: &str,
    metrics: Vec<String>,
    m: usize,
    lam: f64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let metrics: Vec<Metric> = metrics
        .iter()
        .map(|s| s.parse::<Metric>().map_err(value_err))
        .collect::<PyResult<_>>()?;
    let settings = ScoreSettings {
        m,
        lambda: lam,
        ..Default::default()
    };
    settings.validate().map_err(value_err)?;
    let records = eval::read_dataset(std::path::Path::new(dataset_path)).map_err(value_err)?;
    let req = ScoreRequest {
        metrics: &metrics,
        settings: &settings,
        seed,
        frame_limit: None,
        fallback: None,
        first_index: 0,
    };
    let rows = py
        .detach(|| eval::score_records(&records, &req, &|_, _, _| false))
        .map_err(runtime_err)?;
    to_py(py, &rows)
}

/// Effort of escape from the initial state of a scenario.
#[pyfunction]
#[pyo3(signature = (scenario, seed=0, planner="rrt", rounds=10, budget=2000))]
pub fn escape_effort(
    py: Python<'_>,
    scenario: &str,
    seed: u64,
    planner: &str,
    rounds: usize,
    budget: usize,
) -> PyResult<Py<PyAny>> {
    let spec = make_scenario(&scenario_config(scenario, None)?).map_err(value_err)?;
    let cfg = EscapeConfig {
        planner_kind: planner.parse::<PlannerKind>().map_err(value_err)?,
        rounds,
        budget,
        ..Default::default()
    };
    let r = py.detach(|| metrics::effort_of_escape(&spec, &spec.initial, &cfg, seed));
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (costs, lam=1.0))]
pub fn likelihoods(costs: Vec<f64>, lam: f64) -> Vec<f64> {
    metrics::likelihoods(&costs, lam)
}

#[pyfunction]
pub fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    eval::auc(&scores, &labels).map_err(value_err)
}

#[pyfunction]
pub fn average_precision(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    eval::average_precision(&scores, &labels).map_err(value_err)
}

/// Runs the command-line interface, e.g. `cli(["study", "--out", "out"])`; returns the exit code.
#[pyfunction]
pub fn cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("caging".to_string()).chain(args).collect();
    py.detach(|| caging_core::cli::run(argv))
}

#[pymodule]
fn caging(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(escape_effort, m)?)?;
    m.add_function(wrap_pyfunction!(likelihoods, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
