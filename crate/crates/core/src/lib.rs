//! Failure-aware behavior tree execution: backchaining planner, symbolic
//! simulator, postcondition-based failure detection, pluggable advisors,
//! feasibility-gated registry updates, and replanning.

pub mod advisor;
pub mod bt;
pub mod harness;
pub mod monitor;
pub mod planner;
pub mod registry;
pub mod sim;
pub mod types;
pub mod world;

pub use advisor::{Advisor, AdvisorVerdict, MockAdvisor, NullAdvisor};
pub use bt::{diff, from_document, tick, to_document, to_dot, BTNode, NodeStatus};
pub use harness::{ablate, emit_report, run_trials, summarize, AdvisorMode};
pub use monitor::{execute_with_monitoring, ExecutionReport, MonitorConfig, Outcome};
pub use planner::{plan, replan_after_update, Goal, Plan, PlannerConfig};
pub use registry::Registry;
pub use sim::{load_scenario, snapshot, Scenario};
pub use types::GroundRef;
pub use world::WorldState;
