//! Deterministic symbolic simulator: ground-truth effect rules for each
//! skill, the built-in failure scenarios, and scene snapshots for advisor
//! queries.
//!
//! Effect rules are deliberately independent of the skills' *declared*
//! preconditions; the gap between the two is what produces unknown
//! failures at execution time.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::Goal;
use crate::registry::{Registry, RegistryError, SkillSpec};
use crate::types::GroundRef;
use crate::world::{Fact, SizeClass, WorldState, GRIPPER};

/// Effects the simulator can apply; template instantiation validates
/// against this list.
pub const KNOWN_EFFECTS: &[&str] = &[
    "pick",
    "place",
    "insert",
    "lift",
    "move_to",
    "turn_handle",
    "open_door",
    "remove_obstacle",
    "push",
];

pub const BUILTIN_SCENARIOS: &[&str] = &["peg_small", "peg_large", "lift_stacked", "door_handle"];

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown effect `{0}`")]
    UnknownEffect(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("effect `{effect}` expects {expected} args, got {got}")]
    BadArity {
        effect: String,
        expected: usize,
        got: usize,
    },
}

/// Whether a skill's effects actually fired, and why not if they did not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillOutcome {
    pub fired: bool,
    pub blocked_reason: Option<String>,
}

impl SkillOutcome {
    fn fired() -> Self {
        SkillOutcome {
            fired: true,
            blocked_reason: None,
        }
    }

    fn blocked(reason: &str) -> Self {
        SkillOutcome {
            fired: false,
            blocked_reason: Some(reason.to_string()),
        }
    }
}

fn want_args(effect: &str, args: &[String], expected: usize) -> Result<(), SimError> {
    if args.len() != expected {
        return Err(SimError::BadArity {
            effect: effect.to_string(),
            expected,
            got: args.len(),
        });
    }
    Ok(())
}

fn check_objects(world: &WorldState, args: &[String]) -> Result<(), SimError> {
    for arg in args {
        if !world.has_object(arg) {
            return Err(SimError::UnknownObject(arg.clone()));
        }
    }
    Ok(())
}

/// Applies one skill to the world, returning the successor state and the
/// outcome. Blocked effects leave everything but the step counter alone.
pub fn apply_skill(
    world: &WorldState,
    skill: &SkillSpec,
    args: &[String],
) -> Result<(WorldState, SkillOutcome), SimError> {
    check_objects(world, args)?;
    let mut next = world.clone();
    next.step += 1;
    let outcome = apply_effect(&mut next, &skill.effect_ref, args)?;
    if !outcome.fired {
        // keep blocked transitions frame-exact
        let mut unchanged = world.clone();
        unchanged.step = next.step;
        next = unchanged;
    }
    debug_assert!(next.validate().is_ok());
    Ok((next, outcome))
}

fn apply_effect(
    world: &mut WorldState,
    effect: &str,
    args: &[String],
) -> Result<SkillOutcome, SimError> {
    match effect {
        "pick" => {
            want_args(effect, args, 1)?;
            let x = &args[0];
            if world.held().is_some() {
                return Ok(SkillOutcome::blocked("gripper occupied"));
            }
            let info = *world
                .object(x)
                .map_err(|_| SimError::UnknownObject(x.clone()))?;
            if !info.graspable || info.size_class != SizeClass::Small {
                return Ok(SkillOutcome::blocked("exceeds gripper affordance"));
            }
            world.retract_where(|f| {
                !(matches!(f.pred.as_str(), "in" | "blocking" | "on") && f.args[0] == *x)
            });
            world
                .assert_fact(Fact::new("holding", &[GRIPPER, x]))
                .expect("objects checked");
            Ok(SkillOutcome::fired())
        }
        "place" => {
            want_args(effect, args, 1)?;
            let x = args[0].clone();
            if world.held() != Some(x.as_str()) {
                return Ok(SkillOutcome::blocked("not holding"));
            }
            world.retract_fact(&Fact::new("holding", &[GRIPPER, &x]));
            Ok(SkillOutcome::fired())
        }
        "insert" => {
            want_args(effect, args, 2)?;
            let (p, h) = (args[0].clone(), args[1].clone());
            if world.held() != Some(p.as_str()) {
                return Ok(SkillOutcome::blocked("not holding"));
            }
            if world.occupant(&h).is_some() {
                return Ok(SkillOutcome::blocked("occupied"));
            }
            world.retract_fact(&Fact::new("holding", &[GRIPPER, &p]));
            world
                .assert_fact(Fact::new("inserted", &[&p, &h]))
                .expect("objects checked");
            Ok(SkillOutcome::fired())
        }
        "lift" => {
            want_args(effect, args, 1)?;
            let x = args[0].clone();
            if world.held() != Some(x.as_str()) {
                return Ok(SkillOutcome::blocked("not holding"));
            }
            if world.facts_with_pred("on").any(|f| f.args[1] == x) {
                return Ok(SkillOutcome::blocked("top occupied"));
            }
            world
                .assert_fact(Fact::new("lifted", &[&x]))
                .expect("objects checked");
            Ok(SkillOutcome::fired())
        }
        "move_to" => {
            want_args(effect, args, 1)?;
            let loc = args[0].clone();
            world.retract_where(|f| !(f.pred == "at" && f.args[0] == GRIPPER));
            world
                .assert_fact(Fact::new("at", &[GRIPPER, &loc]))
                .expect("objects checked");
            Ok(SkillOutcome::fired())
        }
        "turn_handle" => {
            want_args(effect, args, 1)?;
            world
                .assert_fact(Fact::new("handle_turned", &[&args[0]]))
                .expect("objects checked");
            Ok(SkillOutcome::fired())
        }
        "open_door" => {
            want_args(effect, args, 1)?;
            let d = args[0].clone();
            if !world.has_fact("handle_turned", &[&d]) {
                return Ok(SkillOutcome::blocked("handle not turned"));
            }
            world
                .assert_fact(Fact::new("open", &[&d]))
                .expect("objects checked");
            Ok(SkillOutcome::fired())
        }
        "remove_obstacle" => {
            want_args(effect, args, 1)?;
            let loc = args[0].clone();
            let occupant = match world.occupant(&loc) {
                Some(occ) => occ.to_string(),
                // nothing there; trivially done
                None => return Ok(SkillOutcome::fired()),
            };
            let info = *world.object(&occupant).expect("occupants are objects");
            if !info.graspable || info.size_class != SizeClass::Small {
                return Ok(SkillOutcome::blocked("exceeds gripper affordance"));
            }
            // pick plus place elsewhere: the occupant's placement facts go away
            world.retract_where(|f| {
                !(matches!(f.pred.as_str(), "in" | "blocking" | "on") && f.args[0] == occupant)
            });
            Ok(SkillOutcome::fired())
        }
        "push" => {
            want_args(effect, args, 1)?;
            let named = args[0].clone();
            // accepts either the cluttered location or the obstacle itself
            let target = match world.occupant(&named) {
                Some(occ) => occ.to_string(),
                None => named.clone(),
            };
            let placed = world
                .facts
                .iter()
                .any(|f| matches!(f.pred.as_str(), "in" | "blocking" | "on") && f.args[0] == target);
            if !placed {
                // nothing to push out of the way
                return Ok(SkillOutcome::fired());
            }
            let info = *world.object(&target).expect("objects checked");
            if !info.movable {
                return Ok(SkillOutcome::blocked("target is not movable"));
            }
            world.retract_where(|f| {
                !(matches!(f.pred.as_str(), "in" | "blocking" | "on") && f.args[0] == target)
            });
            Ok(SkillOutcome::fired())
        }
        other => Err(SimError::UnknownEffect(other.to_string())),
    }
}

// ---------------------------------------------------------------------------
// Scenarios

/// Library deltas a scenario applies before execution, e.g. the door task
/// ships `open_door` without its handle precondition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryOverrides {
    #[serde(default)]
    pub remove_preconditions: Vec<PreconditionRemoval>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreconditionRemoval {
    pub skill: String,
    pub condition: String,
}

/// Per-scenario reference answer for scoring identification accuracy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceAnswer {
    pub condition: GroundRef,
    pub skill: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub initial: WorldState,
    pub goal: Goal,
    #[serde(default)]
    pub library_overrides: LibraryOverrides,
    pub reference: ReferenceAnswer,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario io error: {0}")]
    Io(String),
    #[error("scenario is inconsistent: {0}")]
    Invalid(String),
}

const PEG_SMALL: &str = include_str!("../data/scenarios/peg_small.json");
const PEG_LARGE: &str = include_str!("../data/scenarios/peg_large.json");
const LIFT_STACKED: &str = include_str!("../data/scenarios/lift_stacked.json");
const DOOR_HANDLE: &str = include_str!("../data/scenarios/door_handle.json");

/// Loads a built-in scenario by name, or any scenario file by path.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario, ScenarioError> {
    let text = match name_or_path {
        "peg_small" => PEG_SMALL.to_string(),
        "peg_large" => PEG_LARGE.to_string(),
        "lift_stacked" => LIFT_STACKED.to_string(),
        "door_handle" => DOOR_HANDLE.to_string(),
        other => {
            let path = Path::new(other);
            if !path.exists() {
                return Err(ScenarioError::UnknownScenario(other.to_string()));
            }
            std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(e.to_string()))?
        }
    };
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    scenario
        .initial
        .validate()
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    Ok(scenario)
}

impl Scenario {
    /// Builds the registry this scenario executes against: the built-in
    /// library with the scenario's overrides applied.
    pub fn build_registry(&self) -> Result<Registry, RegistryError> {
        let mut registry = Registry::builtin();
        self.apply_overrides(&mut registry)?;
        Ok(registry)
    }

    pub fn apply_overrides(&self, registry: &mut Registry) -> Result<(), RegistryError> {
        for removal in &self.library_overrides.remove_preconditions {
            registry.remove_precondition(&removal.skill, &removal.condition)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Snapshots

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotDetail {
    /// Everything: objects with properties plus all facts. The desk-scale
    /// stand-in for camera images.
    Full,
    /// Task name and object ids only, modeling a monitor without vision.
    Blind,
}

/// Structured text description of the scene handed to advisors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub task: String,
    pub detail: SnapshotDetail,
    pub object_ids: Vec<String>,
    #[serde(default)]
    pub objects: std::collections::BTreeMap<String, crate::world::ObjectInfo>,
    #[serde(default)]
    pub facts: Vec<Fact>,
    pub text: String,
}

pub fn snapshot(world: &WorldState, detail: SnapshotDetail, task: &str) -> SceneDescription {
    let object_ids: Vec<String> = world.objects.keys().cloned().collect();
    match detail {
        SnapshotDetail::Full => {
            let mut text = format!("task: {task}\nobjects:\n");
            for (id, info) in &world.objects {
                text.push_str(&format!(
                    "  {id}: kind={:?} size_class={:?} graspable={} movable={}\n",
                    info.kind, info.size_class, info.graspable, info.movable
                ));
            }
            text.push_str("facts:\n");
            for fact in &world.facts {
                text.push_str(&format!("  {fact}\n"));
            }
            text = text.to_lowercase();
            SceneDescription {
                task: task.to_string(),
                detail,
                object_ids,
                objects: world.objects.clone(),
                facts: world.facts.iter().cloned().collect(),
                text,
            }
        }
        SnapshotDetail::Blind => {
            let text = format!("task: {task}\nobjects: {}\n", object_ids.join(", "));
            SceneDescription {
                task: task.to_string(),
                detail,
                object_ids,
                objects: Default::default(),
                facts: Vec::new(),
                text,
            }
        }
    }
}

impl Scenario {
    pub fn snapshot(&self, world: &WorldState, detail: SnapshotDetail) -> SceneDescription {
        snapshot(world, detail, &self.name)
    }
}
