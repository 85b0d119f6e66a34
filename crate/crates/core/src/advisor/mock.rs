//! Deterministic rule-based advisor. The full variant inspects scene
//! facts and object properties (the stand-in for a vision-capable model);
//! the blind variant sees only the task name and object ids and falls
//! back to a fixed per-task guess, modeling an information-starved
//! text-only model. Both are pure functions of the query.

use crate::bt::{from_document, BTNode, NodeKind};
use crate::registry::{FeasibilityRule, ParamSlot, Provenance, SchemaEntry, SkillTemplate};
use crate::sim::SnapshotDetail;
use crate::types::GroundRef;
use crate::world::SizeClass;

use super::{
    Advisor, AdvisorError, AdvisorQuery, AdvisorVerdict, ConditionMeaning, MissingCondition,
    Prediction, Recovery,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockMode {
    Full,
    Blind,
}

#[derive(Debug, Clone, Copy)]
pub struct MockAdvisor {
    pub mode: MockMode,
}

impl MockAdvisor {
    pub fn full() -> Self {
        MockAdvisor {
            mode: MockMode::Full,
        }
    }

    pub fn blind() -> Self {
        MockAdvisor {
            mode: MockMode::Blind,
        }
    }
}

fn skill_leaves(bt_document: &str) -> Vec<GroundRef> {
    let mut leaves = Vec::new();
    if let Ok(tree) = from_document(bt_document) {
        collect_skills(&tree, &mut leaves);
    }
    leaves
}

fn collect_skills(node: &BTNode, out: &mut Vec<GroundRef>) {
    if let NodeKind::Skill(s) = &node.kind {
        out.push(s.clone());
    }
    for child in node.children() {
        collect_skills(child, out);
    }
}

fn push_template() -> SkillTemplate {
    SkillTemplate {
        name: "push".to_string(),
        params: vec![ParamSlot::new("loc", "location")],
        precondition_schema: vec![],
        postcondition_schema: vec![SchemaEntry::Hole {
            hole: "achieves".to_string(),
        }],
        effect_hole: "push the occupant of the target location out of the way".to_string(),
        feasibility: FeasibilityRule::Push {
            target: "loc".to_string(),
        },
        provenance: Provenance::Advisor,
    }
}

fn meaning(predicate: &str, pattern: &[&str], negated: bool) -> Option<ConditionMeaning> {
    Some(ConditionMeaning {
        predicate: predicate.to_string(),
        pattern: pattern.iter().map(|p| p.to_string()).collect(),
        negated,
    })
}

fn verdict(
    cause: &str,
    missing: MissingCondition,
    recovery: Recovery,
) -> AdvisorVerdict {
    AdvisorVerdict {
        prediction: Prediction::WillFail {
            cause: cause.to_string(),
        },
        missing_condition: Some(missing),
        recovery: Some(recovery),
    }
}

impl MockAdvisor {
    /// Full-detail rule table: keyed on the (failed or planned) skill and
    /// the actual scene facts.
    fn advise_full(&self, query: &AdvisorQuery, target: &GroundRef) -> Option<AdvisorVerdict> {
        let scene = &query.scene;
        let recovery_for = |obstacle: &str| -> Recovery {
            let info = scene.objects.get(obstacle);
            let graspable = info
                .map(|i| i.graspable && i.size_class == SizeClass::Small)
                .unwrap_or(false);
            if graspable {
                Recovery::Existing {
                    skill: "remove_obstacle".to_string(),
                }
            } else {
                Recovery::Template {
                    template: push_template(),
                }
            }
        };
        match target.name.as_str() {
            "insert" => {
                let hole = target.args.get(1)?;
                if let Some(fact) = scene
                    .facts
                    .iter()
                    .find(|f| f.pred == "in" && &f.args[1] == hole)
                {
                    return Some(verdict(
                        "hole occupied",
                        MissingCondition {
                            name: "hole_free".to_string(),
                            args: vec![hole.clone()],
                            attach_to_skill: "insert".to_string(),
                            meaning: meaning("occupied", &["$0"], true),
                        },
                        recovery_for(&fact.args[0]),
                    ));
                }
                if let Some(fact) = scene
                    .facts
                    .iter()
                    .find(|f| f.pred == "blocking" && &f.args[1] == hole)
                {
                    return Some(verdict(
                        "hole blocked from the front",
                        MissingCondition {
                            name: "front_clear".to_string(),
                            args: vec![hole.clone()],
                            attach_to_skill: "insert".to_string(),
                            meaning: meaning("blocking", &["*", "$0"], true),
                        },
                        recovery_for(&fact.args[0]),
                    ));
                }
                None
            }
            "lift" => {
                let obj = target.args.first()?;
                let fact = scene
                    .facts
                    .iter()
                    .find(|f| f.pred == "on" && &f.args[1] == obj)?;
                Some(verdict(
                    "something is stacked on the target",
                    MissingCondition {
                        name: "top_clear".to_string(),
                        args: vec![obj.clone()],
                        attach_to_skill: "lift".to_string(),
                        meaning: meaning("on", &["*", "$0"], true),
                    },
                    recovery_for(&fact.args[0]),
                ))
            }
            "open_door" => {
                let door = target.args.first()?;
                let turned = scene
                    .facts
                    .iter()
                    .any(|f| f.pred == "handle_turned" && &f.args[0] == door);
                if turned {
                    return None;
                }
                Some(verdict(
                    "handle not turned",
                    MissingCondition {
                        name: "handle_turned".to_string(),
                        args: vec![door.clone()],
                        attach_to_skill: "open_door".to_string(),
                        meaning: None,
                    },
                    Recovery::Existing {
                        skill: "turn_handle".to_string(),
                    },
                ))
            }
            _ => None,
        }
    }

    /// Blind rule table: no facts to look at, so each task family gets a
    /// fixed default guess. For peg tasks that default is the grasp-based
    /// removal, which only a feasibility rejection corrects.
    fn advise_blind(&self, query: &AdvisorQuery, target: &GroundRef) -> Option<AdvisorVerdict> {
        match target.name.as_str() {
            "insert" => {
                let hole = target.args.get(1)?;
                if query.feasibility_feedback.is_some() {
                    // second round: grasping was rejected, fall back to a push
                    Some(verdict(
                        "assumed obstruction in front of the hole",
                        MissingCondition {
                            name: "front_clear".to_string(),
                            args: vec![hole.clone()],
                            attach_to_skill: "insert".to_string(),
                            meaning: meaning("blocking", &["*", "$0"], true),
                        },
                        Recovery::Template {
                            template: push_template(),
                        },
                    ))
                } else {
                    Some(verdict(
                        "assumed obstruction at the hole",
                        MissingCondition {
                            name: "hole_free".to_string(),
                            args: vec![hole.clone()],
                            attach_to_skill: "insert".to_string(),
                            meaning: meaning("occupied", &["$0"], true),
                        },
                        Recovery::Existing {
                            skill: "remove_obstacle".to_string(),
                        },
                    ))
                }
            }
            "lift" => {
                let obj = target.args.first()?;
                Some(verdict(
                    "assumed object stacked on the target",
                    MissingCondition {
                        name: "top_clear".to_string(),
                        args: vec![obj.clone()],
                        attach_to_skill: "lift".to_string(),
                        meaning: meaning("on", &["*", "$0"], true),
                    },
                    Recovery::Existing {
                        skill: "remove_obstacle".to_string(),
                    },
                ))
            }
            "open_door" => {
                let door = target.args.first()?;
                Some(verdict(
                    "assumed handle not turned",
                    MissingCondition {
                        name: "handle_turned".to_string(),
                        args: vec![door.clone()],
                        attach_to_skill: "open_door".to_string(),
                        meaning: None,
                    },
                    Recovery::Existing {
                        skill: "turn_handle".to_string(),
                    },
                ))
            }
            _ => None,
        }
    }

    fn targets(&self, query: &AdvisorQuery) -> Vec<GroundRef> {
        let mut targets = Vec::new();
        if let Some(failure) = &query.failure {
            targets.push(failure.skill.clone());
        }
        targets.extend(skill_leaves(&query.bt_document));
        targets
    }
}

impl Advisor for MockAdvisor {
    fn advise(&self, query: &AdvisorQuery) -> Result<AdvisorVerdict, AdvisorError> {
        for target in self.targets(query) {
            let hit = match self.mode {
                MockMode::Full => self.advise_full(query, &target),
                MockMode::Blind => self.advise_blind(query, &target),
            };
            if let Some(verdict) = hit {
                verdict.validate()?;
                return Ok(verdict);
            }
        }
        Ok(AdvisorVerdict::will_succeed())
    }

    fn detail(&self) -> SnapshotDetail {
        match self.mode {
            MockMode::Full => SnapshotDetail::Full,
            MockMode::Blind => SnapshotDetail::Blind,
        }
    }

    fn name(&self) -> &'static str {
        match self.mode {
            MockMode::Full => "mock",
            MockMode::Blind => "mock-blind",
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::bt::to_document;
    use crate::planner::{plan, PlannerConfig};
    use crate::sim::{load_scenario, snapshot};

    pub(crate) fn dummy_query() -> AdvisorQuery {
        query_for("peg_small", SnapshotDetail::Full)
    }

    pub(crate) fn query_for(scenario: &str, detail: SnapshotDetail) -> AdvisorQuery {
        let scenario = load_scenario(scenario).unwrap();
        let registry = scenario.build_registry().unwrap();
        let p = plan(&scenario.goal, &registry, &PlannerConfig::default()).unwrap();
        let (skills, conditions) = AdvisorQuery::summaries_from(&registry);
        AdvisorQuery {
            scene: snapshot(&scenario.initial, detail, &scenario.name),
            image_refs: vec![],
            bt_document: to_document(&p.tree),
            skill_summary: skills,
            condition_summary: conditions,
            failure: None,
            feasibility_feedback: None,
        }
    }

    #[test]
    fn full_mode_flags_peg_small_before_execution() {
        let q = query_for("peg_small", SnapshotDetail::Full);
        let v = MockAdvisor::full().advise(&q).unwrap();
        assert!(matches!(&v.prediction, Prediction::WillFail { cause } if cause == "hole occupied"));
        let missing = v.missing_condition.unwrap();
        assert_eq!(missing.name, "hole_free");
        assert_eq!(missing.args, vec!["hole1"]);
        assert!(matches!(v.recovery, Some(Recovery::Existing { ref skill }) if skill == "remove_obstacle"));
    }

    #[test]
    fn full_mode_suggests_push_template_for_large_obstacle() {
        let q = query_for("peg_large", SnapshotDetail::Full);
        let v = MockAdvisor::full().advise(&q).unwrap();
        let missing = v.missing_condition.unwrap();
        assert_eq!(missing.name, "front_clear");
        assert!(matches!(v.recovery, Some(Recovery::Template { .. })));
    }

    #[test]
    fn blind_mode_defaults_to_grasp_removal_on_peg_large() {
        let q = query_for("peg_large", SnapshotDetail::Blind);
        let v = MockAdvisor::blind().advise(&q).unwrap();
        let missing = v.missing_condition.unwrap();
        assert_eq!(missing.name, "hole_free");
        assert!(matches!(v.recovery, Some(Recovery::Existing { ref skill }) if skill == "remove_obstacle"));
    }

    #[test]
    fn blind_mode_corrects_itself_after_feasibility_feedback() {
        let mut q = query_for("peg_large", SnapshotDetail::Blind);
        q.feasibility_feedback = Some("exceeds gripper affordance".to_string());
        let v = MockAdvisor::blind().advise(&q).unwrap();
        assert_eq!(v.missing_condition.unwrap().name, "front_clear");
        assert!(matches!(v.recovery, Some(Recovery::Template { .. })));
    }

    #[test]
    fn clean_scene_predicts_success() {
        let mut q = query_for("peg_small", SnapshotDetail::Full);
        q.scene.facts.clear();
        let v = MockAdvisor::full().advise(&q).unwrap();
        assert_eq!(v, AdvisorVerdict::will_succeed());
    }

    #[test]
    fn mock_is_deterministic() {
        let q = query_for("lift_stacked", SnapshotDetail::Full);
        let a = MockAdvisor::full().advise(&q).unwrap();
        let b = MockAdvisor::full().advise(&q).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.missing_condition.as_ref().unwrap().name, "top_clear");
    }

    #[test]
    fn door_rule_needs_no_vision() {
        let blind = MockAdvisor::blind()
            .advise(&query_for("door_handle", SnapshotDetail::Blind))
            .unwrap();
        let full = MockAdvisor::full()
            .advise(&query_for("door_handle", SnapshotDetail::Full))
            .unwrap();
        assert_eq!(blind.missing_condition.unwrap().name, "handle_turned");
        assert_eq!(full.missing_condition.unwrap().name, "handle_turned");
    }
}
