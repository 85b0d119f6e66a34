//! Monitored execution across the built-in scenarios and advisor modes,
//! plus the invariants the recovery loop must uphold.

use bt_recover::advisor::{MockAdvisor, NullAdvisor};
use bt_recover::monitor::{
    apply_verdict_mutations, execute_with_monitoring, MonitorConfig, Outcome,
};
use bt_recover::planner::plan;
use bt_recover::sim::{load_scenario, BUILTIN_SCENARIOS};

fn gateless() -> MonitorConfig {
    MonitorConfig {
        feasibility_gate: false,
        ..MonitorConfig::default()
    }
}

#[test]
fn full_mock_recovers_every_scenario_in_one_round() {
    for name in BUILTIN_SCENARIOS {
        let scenario = load_scenario(name).unwrap();
        let report =
            execute_with_monitoring(&scenario, &MockAdvisor::full(), &MonitorConfig::default())
                .unwrap();
        assert_eq!(report.outcome, Outcome::GoalReached, "{name}");
        assert_eq!(report.recoveries.len(), 1, "{name}");
        assert_eq!(report.failures.len(), 1, "{name}");
        assert_eq!(report.ticks_used, 2, "{name}");
    }
}

#[test]
fn null_advisor_detects_but_never_recovers() {
    let scenario = load_scenario("peg_small").unwrap();
    let report =
        execute_with_monitoring(&scenario, &NullAdvisor, &MonitorConfig::default()).unwrap();
    assert_eq!(report.outcome, Outcome::FailedUnrecovered);
    assert_eq!(report.failures.len(), 1);
    assert!(report.recoveries.is_empty());
    // the failure names the skill and the violated postcondition
    let failure = &report.failures[0];
    assert_eq!(failure.skill.name, "insert");
    assert_eq!(
        failure.violated_postconditions[0].to_string(),
        "inserted(peg,hole1)"
    );
}

#[test]
fn recovered_library_runs_clean_with_null_advisor() {
    for name in BUILTIN_SCENARIOS {
        let scenario = load_scenario(name).unwrap();
        let first =
            execute_with_monitoring(&scenario, &MockAdvisor::full(), &MonitorConfig::default())
                .unwrap();
        assert_eq!(first.outcome, Outcome::GoalReached);

        // replay the learned mutations into a fresh registry, then run
        // the same scenario without any advisor
        let mut registry = scenario.build_registry().unwrap();
        let config = MonitorConfig::default();
        for rec in &first.recoveries {
            apply_verdict_mutations(&mut registry, &rec.verdict, &first.failures[0], &config)
                .unwrap();
        }
        let report = bt_recover::monitor::execute_prepared(
            &scenario,
            registry,
            &NullAdvisor,
            &MonitorConfig {
                pre_check: false,
                ..MonitorConfig::default()
            },
        )
        .unwrap();
        assert_eq!(report.outcome, Outcome::GoalReached, "{name}");
        assert!(report.failures.is_empty(), "{name}: {:?}", report.failures);
        assert_eq!(report.ticks_used, 1, "{name}");
    }
}

#[test]
fn each_recovery_round_is_bounded() {
    for name in BUILTIN_SCENARIOS {
        let scenario = load_scenario(name).unwrap();
        let report =
            execute_with_monitoring(&scenario, &MockAdvisor::full(), &MonitorConfig::default())
                .unwrap();
        for rec in &report.recoveries {
            // at most one new condition, one attach, one new achiever
            assert!(rec.registry_mutations.len() <= 3, "{name}");
            let attaches = rec
                .registry_mutations
                .iter()
                .filter(|m| m.starts_with("attach_precondition"))
                .count();
            assert!(attaches <= 1, "{name}");
            let registrations = rec
                .registry_mutations
                .iter()
                .filter(|m| m.starts_with("register_condition"))
                .count();
            assert!(registrations <= 1, "{name}");
        }
    }
}

#[test]
fn blind_without_gate_stalls_on_peg_large() {
    let scenario = load_scenario("peg_large").unwrap();
    let report =
        execute_with_monitoring(&scenario, &MockAdvisor::blind(), &gateless()).unwrap();
    assert_eq!(report.outcome, Outcome::FailedUnrecovered);
    assert!(report
        .notes
        .iter()
        .any(|n| n.contains("changes nothing") || n.contains("infeasible")));
}

#[test]
fn blind_with_gate_rejects_then_recovers_on_peg_large() {
    let scenario = load_scenario("peg_large").unwrap();
    let report =
        execute_with_monitoring(&scenario, &MockAdvisor::blind(), &MonitorConfig::default())
            .unwrap();
    assert_eq!(report.outcome, Outcome::GoalReached);
    let rejections: Vec<_> = report
        .recoveries
        .iter()
        .flat_map(|r| r.rejections.iter())
        .collect();
    assert_eq!(rejections.len(), 1);
    assert_eq!(rejections[0].reason, "exceeds gripper affordance");
    assert_eq!(rejections[0].skill.name, "remove_obstacle");
}

#[test]
fn failure_reports_match_blocked_executions() {
    // detect_failure and the simulator's blocked outcomes must agree:
    // on these scenarios a skill fails its postconditions iff it was
    // blocked by the simulator
    for name in BUILTIN_SCENARIOS {
        let scenario = load_scenario(name).unwrap();
        let report =
            execute_with_monitoring(&scenario, &NullAdvisor, &MonitorConfig::default()).unwrap();
        assert_eq!(report.failures.len(), 1, "{name}");
    }
}

#[test]
fn tick_budget_is_respected() {
    let scenario = load_scenario("peg_small").unwrap();
    let config = MonitorConfig {
        tick_budget: 0,
        ..MonitorConfig::default()
    };
    let report = execute_with_monitoring(&scenario, &NullAdvisor, &config).unwrap();
    assert_eq!(report.outcome, Outcome::TickBudgetExhausted);
    assert_eq!(report.ticks_used, 0);
}

#[test]
fn pre_check_full_mock_predicts_failure_on_peg_small() {
    let scenario = load_scenario("peg_small").unwrap();
    let report =
        execute_with_monitoring(&scenario, &MockAdvisor::full(), &MonitorConfig::default())
            .unwrap();
    let pre = report.pre_check.expect("pre-check ran");
    assert!(!pre.predicts_success());
}

#[test]
fn plans_are_deterministic_across_runs() {
    for name in BUILTIN_SCENARIOS {
        let scenario = load_scenario(name).unwrap();
        let registry = scenario.build_registry().unwrap();
        let config = MonitorConfig::default();
        let a = plan(&scenario.goal, &registry, &config.planner).unwrap();
        let b = plan(&scenario.goal, &registry, &config.planner).unwrap();
        assert_eq!(
            bt_recover::to_document(&a.tree),
            bt_recover::to_document(&b.tree)
        );
    }
}
