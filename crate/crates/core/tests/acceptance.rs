//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Run with `cargo test --test acceptance -- --nocapture` to see
//! the checklist.

use std::collections::VecDeque;
use std::fs;
use std::path::PathBuf;

use bt_recover::advisor::{parse_verdict, AdvisorError, MockAdvisor, NullAdvisor};
use bt_recover::bt::diff;
use bt_recover::harness::ablate;
use bt_recover::monitor::{
    apply_verdict_mutations, execute_prepared, execute_with_monitoring, MonitorConfig, Outcome,
};
use bt_recover::planner::plan;
use bt_recover::registry::Registry;
use bt_recover::sim::{apply_skill, load_scenario, Scenario, BUILTIN_SCENARIOS};
use bt_recover::world::WorldState;

fn verdict_line(criterion: usize, what: &str, pass: bool) {
    println!(
        "criterion {criterion} ({what}): {}",
        if pass { "pass" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {what}");
}

#[test]
fn criterion_1_end_to_end_recovery() {
    let mut pass = true;
    for name in BUILTIN_SCENARIOS {
        let scenario = load_scenario(name).unwrap();
        for _trial in 0..10 {
            let report = execute_with_monitoring(
                &scenario,
                &MockAdvisor::full(),
                &MonitorConfig::default(),
            )
            .unwrap();
            pass &= report.outcome == Outcome::GoalReached && report.recoveries.len() == 1;
        }
    }
    verdict_line(1, "end-to-end recovery, 4 scenarios x 10 trials", pass);
}

#[test]
fn criterion_2_learned_failure_persistence() {
    let mut pass = true;
    for name in BUILTIN_SCENARIOS {
        let scenario = load_scenario(name).unwrap();
        let config = MonitorConfig::default();
        let first =
            execute_with_monitoring(&scenario, &MockAdvisor::full(), &config).unwrap();
        let mut registry = scenario.build_registry().unwrap();
        for rec in &first.recoveries {
            apply_verdict_mutations(&mut registry, &rec.verdict, &first.failures[0], &config)
                .unwrap();
        }
        let fresh = execute_prepared(
            &scenario,
            registry,
            &NullAdvisor,
            &MonitorConfig {
                pre_check: false,
                ..MonitorConfig::default()
            },
        )
        .unwrap();
        pass &= fresh.outcome == Outcome::GoalReached && fresh.failures.is_empty();
    }
    verdict_line(2, "mutated library reruns clean with null advisor", pass);
}

#[test]
fn criterion_3_bt_regeneration_shape() {
    let golden_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let initial = bt_recover::from_document(
        &fs::read_to_string(golden_dir.join("peg_small_initial.bt.json")).unwrap(),
    )
    .unwrap();
    let recovered = bt_recover::from_document(
        &fs::read_to_string(golden_dir.join("peg_small_recovered.bt.json")).unwrap(),
    )
    .unwrap();
    let change_set = diff(&initial, &recovered);
    let roots = change_set.inserted_subtree_roots(&recovered);
    let mut pass = change_set.removed_nodes.is_empty()
        && change_set.moved_nodes.is_empty()
        && roots.len() == 1;
    if let [root] = roots.as_slice() {
        // a Fallback guarding insert: condition leaf hole_free(hole1)
        // inside the insert skill's sequence
        pass &= matches!(root.kind, bt_recover::bt::NodeKind::Fallback(_));
        let mut found_guard = false;
        root.walk(&mut |n| {
            if let bt_recover::bt::NodeKind::Condition(c) = &n.kind {
                found_guard |= c.to_string() == "hole_free(hole1)";
            }
        });
        pass &= found_guard;
        pass &= root.id.starts_with("goal/inserted(peg,hole1)/seq/");
    }
    // the live planner still reproduces the golden pair
    let scenario = load_scenario("peg_small").unwrap();
    let config = MonitorConfig::default();
    let live_initial = plan(
        &scenario.goal,
        &scenario.build_registry().unwrap(),
        &config.planner,
    )
    .unwrap();
    pass &= bt_recover::to_document(&live_initial.tree) == bt_recover::to_document(&initial);
    verdict_line(3, "one inserted Fallback subtree guards insert", pass);
}

/// Breadth-first search over grounded skill sequences, the independent
/// oracle for the planner: does any sequence of at most `max_len` skills
/// reach the goal?
fn bfs_reaches_goal(
    scenario: &Scenario,
    registry: &Registry,
    max_len: usize,
) -> Option<Vec<String>> {
    let objects: Vec<String> = scenario.initial.objects.keys().cloned().collect();
    let goal_met = |world: &WorldState| {
        scenario
            .goal
            .conditions
            .iter()
            .all(|c| registry.evaluate_ground(c, world).unwrap_or(false))
    };
    let mut queue: VecDeque<(WorldState, Vec<String>)> = VecDeque::new();
    let mut seen: Vec<WorldState> = Vec::new();
    queue.push_back((scenario.initial.clone(), Vec::new()));
    while let Some((world, path)) = queue.pop_front() {
        if goal_met(&world) {
            return Some(path);
        }
        if path.len() >= max_len {
            continue;
        }
        for skill in registry.skills() {
            // enumerate every argument tuple over scenario objects
            let mut tuples: Vec<Vec<String>> = vec![Vec::new()];
            for _ in &skill.params {
                tuples = tuples
                    .into_iter()
                    .flat_map(|t| {
                        objects.iter().map(move |o| {
                            let mut next = t.clone();
                            next.push(o.clone());
                            next
                        })
                    })
                    .collect();
            }
            for args in tuples {
                let Ok((next, outcome)) = apply_skill(&world, skill, &args) else {
                    continue;
                };
                if !outcome.fired {
                    continue;
                }
                if seen.iter().any(|s| s.same_situation(&next)) {
                    continue;
                }
                seen.push(next.clone());
                let mut next_path = path.clone();
                next_path.push(format!("{}({})", skill.name, args.join(",")));
                queue.push_back((next, next_path));
            }
        }
    }
    None
}

#[test]
fn criterion_4_planner_soundness_vs_bfs_oracle() {
    let mut pass = true;
    for name in BUILTIN_SCENARIOS {
        let scenario = load_scenario(name).unwrap();
        let config = MonitorConfig::default();
        // complete the library by running the recovery loop once
        let report =
            execute_with_monitoring(&scenario, &MockAdvisor::full(), &config).unwrap();
        let mut registry = scenario.build_registry().unwrap();
        for rec in &report.recoveries {
            apply_verdict_mutations(&mut registry, &rec.verdict, &report.failures[0], &config)
                .unwrap();
        }
        let oracle = bfs_reaches_goal(&scenario, &registry, 6);
        pass &= oracle.is_some();
        // and monitored execution agrees: the goal world is reachable
        let executed = execute_prepared(
            &scenario,
            registry,
            &NullAdvisor,
            &MonitorConfig {
                pre_check: false,
                ..MonitorConfig::default()
            },
        )
        .unwrap();
        pass &= executed.outcome == Outcome::GoalReached && executed.ticks_used <= 50;
    }
    verdict_line(4, "BFS oracle and BT execution agree on reachability", pass);
}

#[test]
fn criterion_5_ablation_ordering() {
    let mut pass = true;
    for name in BUILTIN_SCENARIOS {
        let scenario = load_scenario(name).unwrap();
        let cells = ablate(&scenario, 10, &MonitorConfig::default()).unwrap();
        let rate = |advisor: &str, gate: bool| {
            cells
                .iter()
                .find(|s| s.advisor == advisor && s.feasibility_gate == gate)
                .map(|s| s.success_rate)
                .unwrap_or(-1.0)
        };
        if *name == "peg_large" {
            pass &= rate("mock", true) == 1.0;
            pass &= rate("mock-blind", true) == 1.0;
            pass &= rate("mock-blind", false) == 0.0;
            let blind_gated = cells
                .iter()
                .find(|s| s.advisor == "mock-blind" && s.feasibility_gate)
                .unwrap();
            pass &= blind_gated.total_rejections >= 1;
        } else {
            for cell in &cells {
                pass &= cell.success_rate == 1.0;
            }
        }
    }
    verdict_line(5, "full=1.0, blind+gate=1.0, blind-gate=0.0 on peg_large", pass);
}

#[test]
fn criterion_6_feasibility_gate_rejection() {
    let scenario = load_scenario("peg_large").unwrap();
    let report = execute_with_monitoring(
        &scenario,
        &MockAdvisor::blind(),
        &MonitorConfig::default(),
    )
    .unwrap();
    let pass = report.recoveries.iter().any(|rec| {
        rec.rejections
            .iter()
            .any(|r| r.reason == "exceeds gripper affordance")
    });
    verdict_line(6, "grasp on obstacle_l rejected with exact reason", pass);
}

#[test]
fn criterion_7_bt_algebra_property_suite() {
    // the 1,000-case randomized suite lives in tests/bt_properties.rs;
    // here we assert it is present and enabled so the criterion cannot
    // silently rot
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/bt_properties.rs");
    let source = fs::read_to_string(&path).unwrap();
    let pass = source.contains("with_cases(1000)")
        && source.contains("singleton_sequence_is_identity")
        && source.contains("documents_round_trip")
        && source.contains("ticking_is_deterministic");
    verdict_line(7, "1000-case property suite present (runs as its own target)", pass);
}

#[test]
fn criterion_8_advisor_protocol_fixtures() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/advisor");
    let mut valid = 0;
    let mut malformed_rejected = 0;
    let mut malformed_total = 0;
    let mut pass = true;
    for entry in fs::read_dir(&dir).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().to_string_lossy().into_owned();
        let text = fs::read_to_string(entry.path()).unwrap();
        if name.starts_with("valid_") {
            pass &= parse_verdict(&text).is_ok();
            valid += 1;
        } else if name.starts_with("malformed_") {
            malformed_total += 1;
            if matches!(parse_verdict(&text), Err(AdvisorError::MalformedResponse(_))) {
                malformed_rejected += 1;
            }
        }
    }
    pass &= valid >= 3 && malformed_total == 5 && malformed_rejected == 5;
    verdict_line(8, "fixtures accepted/rejected as committed", pass);
}
