//! Python bindings for the simulator.
//!
//! Structured results cross the boundary as JSON text; `json.loads` on the
//! Python side turns them into plain dictionaries.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use gradecast_core::consensus::ConsensusVariant;
use gradecast_core::oracle::{gradecast_exhaustive, oracle_exhaustive, OracleOptions};
use gradecast_core::report::{report_json, report_text, write_artifacts};
use gradecast_core::scenario::{self, RunResult, Scenario};
use gradecast_core::sweep::{self, Axis};

/// Resilience parameters: `n` nodes, at most `t` corrupted, `f` actually
/// corrupted in a given run.
#[pyclass(name = "SystemParams", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PySystemParams(gradecast_core::SystemParams);

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (n, t, f = 0))]
    fn new(n: usize, t: usize, f: usize) -> PyResult<Self> {
        gradecast_core::SystemParams::new(n, t, f)
            .map(PySystemParams)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn t(&self) -> usize {
        self.0.t
    }

    #[getter]
    fn f(&self) -> usize {
        self.0.f
    }

    /// `n - t`.
    fn quorum(&self) -> usize {
        self.0.quorum()
    }

    /// `t + 1`.
    fn weak_quorum(&self) -> usize {
        self.0.weak_quorum()
    }

    fn __repr__(&self) -> String {
        format!("SystemParams(n={}, t={}, f={})", self.0.n, self.0.t, self.0.f)
    }
}

/// Outcome of one scenario run.
#[pyclass(name = "RunReport", frozen, skip_from_py_object)]
pub struct PyRunReport {
    result: RunResult,
}

#[pymethods]
impl PyRunReport {
    /// True iff every checked invariant held.
    #[getter]
    fn passed(&self) -> bool {
        self.result.passed()
    }

    /// Ids of the failed checks.
    #[getter]
    fn failed_checks(&self) -> Vec<String> {
        self.result.checks.iter().filter(|c| !c.pass).map(|c| c.id.clone()).collect()
    }

    /// Summary and checks as JSON text.
    fn json(&self) -> String {
        report_json(&self.result)
    }

    fn text(&self) -> String {
        report_text(&self.result)
    }

    /// Writes traces, tables and reports into `dir`; returns the file paths.
    fn write_artifacts(&self, dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        write_artifacts(&dir, &self.result)
            .map(|a| a.files)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

pub fn run_scenario_str(text: &str) -> Result<RunResult, String> {
    let scenario = Scenario::from_json_str(text).map_err(|e| e.to_string())?;
    scenario::run_scenario(&scenario).map_err(|e| e.to_string())
}

/// Parses and runs a scenario given as JSON text.
#[pyfunction]
fn run_scenario(py: Python<'_>, scenario_json: &str) -> PyResult<PyRunReport> {
    let text = scenario_json.to_owned();
    py.detach(move || run_scenario_str(&text))
        .map(|result| PyRunReport { result })
        .map_err(PyValueError::new_err)
}

pub fn sweep_str(template_json: &str, axes: &[String]) -> Result<String, String> {
    let template: serde_json::Value = serde_json::from_str(template_json).map_err(|e| e.to_string())?;
    let axes: Vec<Axis> = axes.iter().map(|a| Axis::parse(a)).collect::<Result<_, _>>()?;
    let rows = sweep::run_sweep(&template, &axes);
    sweep::sweep_csv(&axes, &rows).map_err(|e| e.to_string())
}

/// Runs the cross product of `axes` (each `key=v1,v2`) over a template
/// and returns the sweep table as CSV text.
#[pyfunction]
fn sweep_csv(py: Python<'_>, template_json: &str, axes: Vec<String>) -> PyResult<String> {
    let template = template_json.to_owned();
    py.detach(move || sweep_str(&template, &axes)).map_err(PyValueError::new_err)
}

pub fn parse_variant(name: &str) -> Result<ConsensusVariant, String> {
    match name {
        "correct" => Ok(ConsensusVariant::Correct),
        "weak-break" => Ok(ConsensusVariant::WeakBreak),
        "no-bad-update" => Ok(ConsensusVariant::NoBadUpdate),
        other => Err(format!("unknown variant {other:?}")),
    }
}

pub fn oracle_str(
    n: usize,
    t: usize,
    domain: u32,
    variant: &str,
    inputs: Option<Vec<Vec<i64>>>,
) -> Result<String, String> {
    let params = gradecast_core::SystemParams::new(n, t, 0).map_err(|e| e.to_string())?;
    let options = OracleOptions {
        variant: parse_variant(variant)?,
        include_fault_free: inputs.is_none(),
        only_inputs: inputs,
        ..OracleOptions::default()
    };
    let verdict = oracle_exhaustive(params, domain, &options).map_err(|e| e.to_string())?;
    serde_json::to_string(&verdict).map_err(|e| e.to_string())
}

/// Exhaustive consensus exploration with one corrupted node. `inputs`
/// restricts the corrupted runs to the listed honest input assignments.
/// Returns the verdict as JSON text.
#[pyfunction]
#[pyo3(signature = (n = 4, t = 1, domain = 2, variant = "correct", inputs = None))]
fn oracle(
    py: Python<'_>,
    n: usize,
    t: usize,
    domain: u32,
    variant: &str,
    inputs: Option<Vec<Vec<i64>>>,
) -> PyResult<String> {
    let variant = variant.to_owned();
    py.detach(move || oracle_str(n, t, domain, &variant, inputs))
        .map_err(PyValueError::new_err)
}

/// Exhaustive gradecast check over corrupted-leader and corrupted-echoer
/// strategies. Returns the verdict as JSON text.
#[pyfunction]
#[pyo3(signature = (n = 4, t = 1, domain = 2))]
fn gradecast_oracle(py: Python<'_>, n: usize, t: usize, domain: u32) -> PyResult<String> {
    py.detach(move || {
        gradecast_exhaustive(n, t, domain)
            .map_err(|e| e.to_string())
            .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
    })
    .map_err(PyValueError::new_err)
}

#[pymodule]
fn gradecast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add_class::<PyRunReport>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(gradecast_oracle, m)?)?;
    m.add("UNSYNC_TICK_CONSTANT", scenario::UNSYNC_TICK_CONSTANT)?;
    Ok(())
}
