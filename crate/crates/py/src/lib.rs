//! Python bindings: behavior tree documents, planning, scenario
//! snapshots, and monitored execution, exchanged as JSON strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use bt_recover::harness::{self, AdvisorMode, MetricsSummary};
use bt_recover::monitor::{execute_with_monitoring, MonitorConfig};
use bt_recover::planner::{plan as plan_tree, Goal, PlannerConfig};
use bt_recover::registry::Registry;
use bt_recover::sim::{load_scenario, SnapshotDetail};
use bt_recover::types::GroundRef;
use bt_recover::bt;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A behavior tree held as its JSON document.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct BehaviorTree {
    tree: bt::BTNode,
}

#[pymethods]
impl BehaviorTree {
    #[staticmethod]
    fn from_document(text: &str) -> PyResult<Self> {
        Ok(BehaviorTree {
            tree: bt::from_document(text).map_err(err)?,
        })
    }

    fn to_document(&self) -> String {
        bt::to_document(&self.tree)
    }

    fn to_dot(&self) -> String {
        bt::to_dot(&self.tree, &bt::ChangeSet::default())
    }

    /// Structural delta against another tree, as JSON.
    fn diff(&self, other: &BehaviorTree) -> PyResult<String> {
        serde_json::to_string_pretty(&bt::diff(&self.tree, &other.tree)).map_err(err)
    }

    fn node_count(&self) -> usize {
        let mut count = 0;
        self.tree.walk(&mut |_| count += 1);
        count
    }

    fn __repr__(&self) -> String {
        format!("BehaviorTree(root={:?})", self.tree.id)
    }
}

/// Plans a tree from comma-joined goal conditions, e.g.
/// "inserted(peg,hole1)". Uses the built-in library unless one is given.
#[pyfunction]
#[pyo3(signature = (goal, library_json=None, max_depth=8))]
fn plan(goal: &str, library_json: Option<&str>, max_depth: usize) -> PyResult<BehaviorTree> {
    let registry = match library_json {
        Some(text) => Registry::from_library_str(text).map_err(err)?,
        None => Registry::builtin(),
    };
    let conditions = goal
        .split("),")
        .map(|part| {
            let part = part.trim();
            let owned;
            let text = if part.ends_with(')') {
                part
            } else {
                owned = format!("{part})");
                &owned
            };
            GroundRef::parse(text).map_err(err)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let config = PlannerConfig {
        max_depth,
        ..PlannerConfig::default()
    };
    let result = plan_tree(&Goal { conditions }, &registry, &config).map_err(err)?;
    Ok(BehaviorTree { tree: result.tree })
}

/// Scene description of a scenario's initial state, as JSON.
#[pyfunction]
#[pyo3(signature = (scenario, detail="full"))]
fn snapshot(scenario: &str, detail: &str) -> PyResult<String> {
    let scenario = load_scenario(scenario).map_err(err)?;
    let detail = match detail {
        "full" => SnapshotDetail::Full,
        "blind" => SnapshotDetail::Blind,
        other => return Err(err(format!("unknown detail `{other}`"))),
    };
    let scene = scenario.snapshot(&scenario.initial, detail);
    serde_json::to_string_pretty(&scene).map_err(err)
}

/// One monitored execution; returns the full report as JSON.
#[pyfunction]
#[pyo3(signature = (scenario, advisor="mock", feasibility_gate=true))]
fn run(scenario: &str, advisor: &str, feasibility_gate: bool) -> PyResult<String> {
    let scenario = load_scenario(scenario).map_err(err)?;
    let mode: AdvisorMode = advisor.parse().map_err(err)?;
    let config = MonitorConfig {
        feasibility_gate,
        ..MonitorConfig::default()
    };
    let advisor = mode.build().map_err(err)?;
    let report = execute_with_monitoring(&scenario, advisor.as_ref(), &config).map_err(err)?;
    serde_json::to_string_pretty(&report).map_err(err)
}

/// Repeated scored runs; returns the metrics summary as JSON.
#[pyfunction]
#[pyo3(signature = (scenario, advisor="mock", n=10, feasibility_gate=true))]
fn run_trials(scenario: &str, advisor: &str, n: usize, feasibility_gate: bool) -> PyResult<String> {
    let scenario = load_scenario(scenario).map_err(err)?;
    let mode: AdvisorMode = advisor.parse().map_err(err)?;
    let config = MonitorConfig {
        feasibility_gate,
        ..MonitorConfig::default()
    };
    let records = harness::run_trials_lenient(&scenario, mode, &config, n).map_err(err)?;
    let summary: MetricsSummary = harness::summarize(&records).map_err(err)?;
    serde_json::to_string_pretty(&summary).map_err(err)
}

#[pymodule]
fn btrecover(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<BehaviorTree>()?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_trials, m)?)?;
    Ok(())
}
