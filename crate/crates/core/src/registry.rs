//! The mutable knowledge base: conditions, skills with pre/postconditions,
//! feasibility rules, and partially specified skill templates. Recovery
//! updates this store and replans against the new version.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::GroundRef;
use crate::world::{ObjectKind, SizeClass, WorldState};

pub const BUILTIN_LIBRARY: &str = include_str!("../data/library.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlot {
    pub name: String,
    pub ty: String,
}

impl ParamSlot {
    pub fn new(name: &str, ty: &str) -> Self {
        ParamSlot {
            name: name.to_string(),
            ty: ty.to_string(),
        }
    }
}

/// A predicate pattern over the world. `pattern` entries are `"*"` (any),
/// `"$param"` (bound argument) or a literal object id. With `negated` set
/// the condition holds when no matching ground fact exists.
///
/// The predicate `occupied` is derived: `occupied(loc)` holds when anything
/// is `in`, `blocking` or `on` the location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    #[serde(default)]
    pub params: Vec<ParamSlot>,
    #[serde(default)]
    pub negated: bool,
    pub predicate: String,
    pub pattern: Vec<String>,
}

impl Condition {
    pub fn negate(&self) -> Condition {
        Condition {
            negated: !self.negated,
            ..self.clone()
        }
    }

    fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    fn validate(&self) -> Result<(), RegistryError> {
        for entry in &self.pattern {
            if let Some(param) = entry.strip_prefix('$') {
                if self.param_index(param).is_none() {
                    return Err(RegistryError::BadPattern(format!(
                        "condition `{}` pattern references unknown param `{param}`",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total under the closed-world assumption: every (condition, world)
    /// pair yields true or false.
    pub fn evaluate(&self, args: &[String], world: &WorldState) -> Result<bool, RegistryError> {
        if args.len() != self.params.len() {
            return Err(RegistryError::ArityMismatch {
                name: self.name.clone(),
                expected: self.params.len(),
                got: args.len(),
            });
        }
        let resolved: Vec<Option<&str>> = self
            .pattern
            .iter()
            .map(|entry| {
                if entry == "*" {
                    None
                } else if let Some(param) = entry.strip_prefix('$') {
                    let idx = self.param_index(param).expect("validated at registration");
                    Some(args[idx].as_str())
                } else {
                    Some(entry.as_str())
                }
            })
            .collect();

        let holds = if self.predicate == "occupied" {
            match resolved.first() {
                Some(Some(loc)) => world.occupied(loc),
                _ => false,
            }
        } else {
            world.facts_with_pred(&self.predicate).any(|fact| {
                fact.args.len() == resolved.len()
                    && fact
                        .args
                        .iter()
                        .zip(&resolved)
                        .all(|(a, want)| want.map(|w| w == a).unwrap_or(true))
            })
        };
        Ok(holds != self.negated)
    }
}

/// A condition reference inside a skill, with arguments that are either
/// `"$param"` references into the skill's parameter list or literals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CondRef {
    pub name: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl CondRef {
    pub fn new(name: &str, args: &[&str]) -> Self {
        CondRef {
            name: name.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }

    /// Grounds the reference given the skill's parameters and call arguments.
    pub fn resolve(
        &self,
        params: &[ParamSlot],
        call_args: &[String],
    ) -> Result<GroundRef, RegistryError> {
        let args = self
            .args
            .iter()
            .map(|a| {
                if let Some(param) = a.strip_prefix('$') {
                    let idx = params
                        .iter()
                        .position(|p| p.name == param)
                        .ok_or_else(|| {
                            RegistryError::BadPattern(format!(
                                "reference `{}` names unknown param `{param}`",
                                self.name
                            ))
                        })?;
                    Ok(call_args[idx].clone())
                } else {
                    Ok(a.clone())
                }
            })
            .collect::<Result<Vec<_>, RegistryError>>()?;
        Ok(GroundRef {
            name: self.name.clone(),
            args,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum FeasibilityRule {
    /// Grasp-family: the resolved target must be small and graspable.
    Grasp { target: String },
    /// Push-family: the resolved target must be movable.
    Push { target: String },
    Default,
}

impl Default for FeasibilityRule {
    fn default() -> Self {
        FeasibilityRule::Default
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Builtin,
    Advisor,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance::Builtin
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<ParamSlot>,
    #[serde(default)]
    pub preconditions: Vec<CondRef>,
    pub postconditions: Vec<CondRef>,
    #[serde(default)]
    pub feasibility: FeasibilityRule,
    #[serde(rename = "effect")]
    pub effect_ref: String,
    #[serde(default)]
    pub provenance: Provenance,
}

/// Slot in a template schema: either a concrete reference or a named hole.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaEntry {
    Hole { hole: String },
    Fixed(CondRef),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillTemplate {
    pub name: String,
    #[serde(default)]
    pub params: Vec<ParamSlot>,
    #[serde(default)]
    pub precondition_schema: Vec<SchemaEntry>,
    #[serde(default)]
    pub postcondition_schema: Vec<SchemaEntry>,
    pub effect_hole: String,
    #[serde(default)]
    pub feasibility: FeasibilityRule,
    #[serde(default)]
    pub provenance: Provenance,
}

/// Fills template holes: condition references per hole name, plus the
/// simulator effect the template's `effect_hole` binds to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateCompletion {
    #[serde(default)]
    pub holes: BTreeMap<String, CondRef>,
    #[serde(default)]
    pub effect: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible(String),
}

/// A skill that achieves a goal condition, with all parameters grounded
/// by unification against one of its postconditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Achiever {
    pub skill: String,
    pub args: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("skill `{skill}` references unregistered condition `{condition}`")]
    DanglingConditionReference { skill: String, condition: String },
    #[error("unknown condition `{0}`")]
    UnknownCondition(String),
    #[error("unknown skill `{0}`")]
    UnknownSkill(String),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("arity mismatch for `{name}`: expected {expected} args, got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("skill `{0}` declares no postconditions")]
    EmptyPostconditions(String),
    #[error("unfilled template holes: {0:?}")]
    UnfilledHole(Vec<String>),
    #[error("effect `{0}` is unknown to the simulator")]
    UnknownEffect(String),
    #[error("bad pattern: {0}")]
    BadPattern(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("library parse error: {0}")]
    LibraryParse(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SkillLibrary {
    #[serde(default)]
    pub conditions: Vec<Condition>,
    #[serde(default)]
    pub skills: Vec<SkillSpec>,
    #[serde(default)]
    pub templates: Vec<SkillTemplate>,
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    conditions: IndexMap<String, Condition>,
    skills: IndexMap<String, SkillSpec>,
    templates: IndexMap<String, SkillTemplate>,
    version: u64,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// Loads the skill library shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_library_str(BUILTIN_LIBRARY)
            .expect("embedded library must be valid")
    }

    pub fn from_library_str(text: &str) -> Result<Self, RegistryError> {
        let lib: SkillLibrary = serde_json::from_str(text)
            .map_err(|e| RegistryError::LibraryParse(e.to_string()))?;
        let mut reg = Registry::new();
        for c in lib.conditions {
            reg.register_condition(c, false)?;
        }
        for s in lib.skills {
            reg.register_skill(s, false)?;
        }
        for t in lib.templates {
            reg.register_template(t, false)?;
        }
        Ok(reg)
    }

    /// Each successful mutation bumps this; plans snapshot it.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.get(name)
    }

    pub fn skill(&self, name: &str) -> Option<&SkillSpec> {
        self.skills.get(name)
    }

    pub fn template(&self, name: &str) -> Option<&SkillTemplate> {
        self.templates.get(name)
    }

    pub fn conditions(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.values()
    }

    pub fn skills(&self) -> impl Iterator<Item = &SkillSpec> {
        self.skills.values()
    }

    pub fn templates(&self) -> impl Iterator<Item = &SkillTemplate> {
        self.templates.values()
    }

    pub fn register_condition(
        &mut self,
        condition: Condition,
        overwrite: bool,
    ) -> Result<(), RegistryError> {
        if !overwrite && self.conditions.contains_key(&condition.name) {
            return Err(RegistryError::DuplicateName(condition.name));
        }
        condition.validate()?;
        self.conditions.insert(condition.name.clone(), condition);
        self.version += 1;
        Ok(())
    }

    pub fn register_skill(
        &mut self,
        skill: SkillSpec,
        overwrite: bool,
    ) -> Result<(), RegistryError> {
        if !overwrite && self.skills.contains_key(&skill.name) {
            return Err(RegistryError::DuplicateName(skill.name));
        }
        if skill.postconditions.is_empty() {
            return Err(RegistryError::EmptyPostconditions(skill.name));
        }
        for cond_ref in skill.preconditions.iter().chain(&skill.postconditions) {
            if !self.conditions.contains_key(&cond_ref.name) {
                return Err(RegistryError::DanglingConditionReference {
                    skill: skill.name,
                    condition: cond_ref.name.clone(),
                });
            }
            // Param references must resolve.
            cond_ref.resolve(
                &skill.params,
                &vec![String::new(); skill.params.len()],
            )?;
        }
        self.skills.insert(skill.name.clone(), skill);
        self.version += 1;
        Ok(())
    }

    pub fn register_template(
        &mut self,
        template: SkillTemplate,
        overwrite: bool,
    ) -> Result<(), RegistryError> {
        if !overwrite && self.templates.contains_key(&template.name) {
            return Err(RegistryError::DuplicateName(template.name));
        }
        self.templates.insert(template.name.clone(), template);
        self.version += 1;
        Ok(())
    }

    /// Prepends (or appends) a precondition to a registered skill.
    /// Returns false without a version bump when already present.
    pub fn add_precondition(
        &mut self,
        skill_name: &str,
        cond_ref: CondRef,
        prepend: bool,
    ) -> Result<bool, RegistryError> {
        if !self.conditions.contains_key(&cond_ref.name) {
            return Err(RegistryError::DanglingConditionReference {
                skill: skill_name.to_string(),
                condition: cond_ref.name,
            });
        }
        let skill = self
            .skills
            .get_mut(skill_name)
            .ok_or_else(|| RegistryError::UnknownSkill(skill_name.to_string()))?;
        if skill.preconditions.contains(&cond_ref) {
            return Ok(false);
        }
        if prepend {
            skill.preconditions.insert(0, cond_ref);
        } else {
            skill.preconditions.push(cond_ref);
        }
        self.version += 1;
        Ok(true)
    }

    /// Drops every precondition referencing the named condition from a
    /// skill. Used by scenario library overrides.
    pub fn remove_precondition(
        &mut self,
        skill_name: &str,
        condition_name: &str,
    ) -> Result<bool, RegistryError> {
        let skill = self
            .skills
            .get_mut(skill_name)
            .ok_or_else(|| RegistryError::UnknownSkill(skill_name.to_string()))?;
        let before = skill.preconditions.len();
        skill.preconditions.retain(|c| c.name != condition_name);
        if skill.preconditions.len() == before {
            return Ok(false);
        }
        self.version += 1;
        Ok(true)
    }

    /// Makes a registered skill an achiever of the condition.
    pub fn add_postcondition(
        &mut self,
        skill_name: &str,
        cond_ref: CondRef,
    ) -> Result<bool, RegistryError> {
        if !self.conditions.contains_key(&cond_ref.name) {
            return Err(RegistryError::DanglingConditionReference {
                skill: skill_name.to_string(),
                condition: cond_ref.name,
            });
        }
        let skill = self
            .skills
            .get_mut(skill_name)
            .ok_or_else(|| RegistryError::UnknownSkill(skill_name.to_string()))?;
        if skill.postconditions.contains(&cond_ref) {
            return Ok(false);
        }
        skill.postconditions.push(cond_ref);
        self.version += 1;
        Ok(true)
    }

    pub fn evaluate_condition(
        &self,
        name: &str,
        args: &[String],
        world: &WorldState,
    ) -> Result<bool, RegistryError> {
        let condition = self
            .conditions
            .get(name)
            .ok_or_else(|| RegistryError::UnknownCondition(name.to_string()))?;
        condition.evaluate(args, world)
    }

    pub fn evaluate_ground(
        &self,
        cond: &GroundRef,
        world: &WorldState,
    ) -> Result<bool, RegistryError> {
        self.evaluate_condition(&cond.name, &cond.args, world)
    }

    /// Feasibility of a bound skill instance. When the rule's target is a
    /// hole or door, the check applies to its occupant (if any).
    pub fn check_feasibility(
        &self,
        skill: &SkillSpec,
        args: &[String],
        world: &WorldState,
    ) -> Result<Feasibility, RegistryError> {
        if args.len() != skill.params.len() {
            return Err(RegistryError::ArityMismatch {
                name: skill.name.clone(),
                expected: skill.params.len(),
                got: args.len(),
            });
        }
        for arg in args {
            if !world.has_object(arg) {
                return Err(RegistryError::UnknownObject(arg.clone()));
            }
        }
        let target_param = match &skill.feasibility {
            FeasibilityRule::Default => return Ok(Feasibility::Feasible),
            FeasibilityRule::Grasp { target } | FeasibilityRule::Push { target } => target,
        };
        let idx = skill
            .params
            .iter()
            .position(|p| &p.name == target_param)
            .ok_or_else(|| {
                RegistryError::BadPattern(format!(
                    "feasibility target `{target_param}` is not a param of `{}`",
                    skill.name
                ))
            })?;
        let named = &args[idx];
        let info = world.object(named).map_err(|_| {
            RegistryError::UnknownObject(named.clone())
        })?;
        let subject = match info.kind {
            ObjectKind::Hole | ObjectKind::Door => match world.occupant(named) {
                Some(occ) => occ,
                // Nothing there to act on; the skill is trivially runnable.
                None => return Ok(Feasibility::Feasible),
            },
            _ => named.as_str(),
        };
        let subject_info = world.object(subject).expect("occupants are objects");
        match &skill.feasibility {
            FeasibilityRule::Grasp { .. } => {
                if subject_info.graspable && subject_info.size_class == SizeClass::Small {
                    Ok(Feasibility::Feasible)
                } else {
                    Ok(Feasibility::Infeasible(
                        "exceeds gripper affordance".to_string(),
                    ))
                }
            }
            FeasibilityRule::Push { .. } => {
                if subject_info.movable {
                    Ok(Feasibility::Feasible)
                } else {
                    Ok(Feasibility::Infeasible("target is not movable".to_string()))
                }
            }
            FeasibilityRule::Default => unreachable!(),
        }
    }

    /// Skills with a postcondition unifying with the goal, in registry
    /// insertion order. Skills whose parameters the unification leaves
    /// unbound are skipped (no guessing).
    pub fn skills_achieving(&self, goal: &GroundRef) -> Vec<Achiever> {
        let mut achievers = Vec::new();
        'skills: for skill in self.skills.values() {
            for post in &skill.postconditions {
                if post.name != goal.name || post.args.len() != goal.args.len() {
                    continue;
                }
                let mut binding: BTreeMap<&str, &str> = BTreeMap::new();
                let mut ok = true;
                for (slot, value) in post.args.iter().zip(&goal.args) {
                    if let Some(param) = slot.strip_prefix('$') {
                        match binding.get(param) {
                            Some(prev) if *prev != value.as_str() => {
                                ok = false;
                                break;
                            }
                            _ => {
                                binding.insert(param, value.as_str());
                            }
                        }
                    } else if slot != value {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    continue;
                }
                let mut args = Vec::with_capacity(skill.params.len());
                for param in &skill.params {
                    match binding.get(param.name.as_str()) {
                        Some(v) => args.push(v.to_string()),
                        None => continue 'skills,
                    }
                }
                achievers.push(Achiever {
                    skill: skill.name.clone(),
                    args,
                });
                continue 'skills;
            }
        }
        achievers
    }

    /// Turns a completed template into a registrable skill.
    pub fn instantiate_template(
        template: &SkillTemplate,
        completion: &TemplateCompletion,
        known_effects: &[&str],
    ) -> Result<SkillSpec, RegistryError> {
        let mut unfilled = Vec::new();
        let fill = |schema: &[SchemaEntry], unfilled: &mut Vec<String>| -> Vec<CondRef> {
            schema
                .iter()
                .filter_map(|entry| match entry {
                    SchemaEntry::Fixed(cond_ref) => Some(cond_ref.clone()),
                    SchemaEntry::Hole { hole } => match completion.holes.get(hole) {
                        Some(cond_ref) => Some(cond_ref.clone()),
                        None => {
                            unfilled.push(hole.clone());
                            None
                        }
                    },
                })
                .collect()
        };
        let preconditions = fill(&template.precondition_schema, &mut unfilled);
        let postconditions = fill(&template.postcondition_schema, &mut unfilled);
        let effect = match &completion.effect {
            Some(e) => e.clone(),
            None => {
                unfilled.push("effect".to_string());
                String::new()
            }
        };
        if !unfilled.is_empty() {
            return Err(RegistryError::UnfilledHole(unfilled));
        }
        if !known_effects.contains(&effect.as_str()) {
            return Err(RegistryError::UnknownEffect(effect));
        }
        if postconditions.is_empty() {
            return Err(RegistryError::EmptyPostconditions(template.name.clone()));
        }
        Ok(SkillSpec {
            name: template.name.clone(),
            params: template.params.clone(),
            preconditions,
            postconditions,
            feasibility: template.feasibility.clone(),
            effect_ref: effect,
            provenance: template.provenance,
        })
    }
}
