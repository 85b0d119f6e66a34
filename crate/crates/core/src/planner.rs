//! Backchaining reactive planner: synthesizes a behavior tree that
//! achieves a goal condition set from the current registry, and
//! regenerates it after registry updates.
//!
//! For each unmet condition with an achiever the planner emits
//! `Fallback(condition?, Sequence(preconditions..., skill!))`, recursing
//! into the skill's preconditions until depth runs out, a condition has
//! no achiever, or a condition reappears on its own expansion path.
//! Node ids are derived from the expansion path, so replanning after a
//! registry update moves no unrelated nodes and diffs stay stable.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::{diff, BTNode, ChangeSet};
use crate::registry::Registry;
use crate::types::GroundRef;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub max_depth: usize,
    /// Forwarded to the execution harness as a default tick budget.
    pub tick_budget_hint: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            max_depth: 8,
            tick_budget_hint: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub conditions: Vec<GroundRef>,
}

impl Goal {
    pub fn single(cond: GroundRef) -> Self {
        Goal {
            conditions: vec![cond],
        }
    }
}

/// A planned tree plus the metadata replanning needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub tree: BTNode,
    pub registry_version: u64,
    /// Conditions whose expansion hit the depth limit although an
    /// achiever existed.
    pub depth_warnings: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("invalid goal: condition `{0}` is not registered")]
    InvalidGoal(String),
    #[error("goal has no conditions")]
    EmptyGoal,
    #[error("registry unchanged since the previous plan; nothing to replan")]
    StaleRegistry,
}

struct Expansion<'a> {
    registry: &'a Registry,
    config: &'a PlannerConfig,
    used_ids: BTreeSet<String>,
    warnings: Vec<String>,
}

impl Expansion<'_> {
    fn unique_id(&mut self, base: String) -> String {
        if self.used_ids.insert(base.clone()) {
            return base;
        }
        let mut n = 2;
        loop {
            let candidate = format!("{base}~{n}");
            if self.used_ids.insert(candidate.clone()) {
                return candidate;
            }
            n += 1;
        }
    }

    fn expand(&mut self, cond: &GroundRef, depth: usize, path: &mut Vec<String>, prefix: &str) -> BTNode {
        let key = cond.key();
        let achievers = self.registry.skills_achieving(cond);
        let cyclic = path.contains(&key);
        if achievers.is_empty() || cyclic {
            let id = self.unique_id(prefix.to_string());
            return BTNode::condition(id, cond.clone());
        }
        if depth == 0 {
            self.warnings.push(key);
            let id = self.unique_id(prefix.to_string());
            return BTNode::condition(id, cond.clone());
        }
        // first achiever wins; ties break on registry insertion order
        let achiever = &achievers[0];
        let skill = self
            .registry
            .skill(&achiever.skill)
            .expect("achiever comes from the registry");
        let skill_ref = GroundRef {
            name: achiever.skill.clone(),
            args: achiever.args.clone(),
        };
        let seq_prefix = format!("{prefix}/seq");

        path.push(key);
        let mut seq_children = Vec::new();
        for pre in skill.preconditions.clone() {
            let ground = pre
                .resolve(&skill.params, &achiever.args)
                .expect("validated at registration");
            let child_prefix = format!("{seq_prefix}/{}", ground.key());
            seq_children.push(self.expand(&ground, depth - 1, path, &child_prefix));
        }
        path.pop();

        let skill_id = self.unique_id(format!("{seq_prefix}/!{}", skill_ref.key()));
        seq_children.push(BTNode::skill(skill_id, skill_ref));

        let cond_id = self.unique_id(format!("{prefix}/c"));
        let seq_id = self.unique_id(seq_prefix);
        let fb_id = self.unique_id(prefix.to_string());
        BTNode::fallback(
            fb_id,
            vec![
                BTNode::condition(cond_id, cond.clone()),
                BTNode::sequence(seq_id, seq_children),
            ],
        )
    }
}

/// Plans a tree for the goal against a registry snapshot. Pure and
/// deterministic: the same (goal, registry version, config) always yields
/// a structurally identical tree with identical node ids.
pub fn plan(goal: &Goal, registry: &Registry, config: &PlannerConfig) -> Result<Plan, PlanError> {
    if goal.conditions.is_empty() {
        return Err(PlanError::EmptyGoal);
    }
    for cond in &goal.conditions {
        if registry.condition(&cond.name).is_none() {
            return Err(PlanError::InvalidGoal(cond.name.clone()));
        }
    }
    let mut exp = Expansion {
        registry,
        config,
        used_ids: BTreeSet::new(),
        warnings: Vec::new(),
    };
    exp.used_ids.insert("goal".to_string());
    let mut subtrees = Vec::new();
    for cond in &goal.conditions {
        let prefix = format!("goal/{}", cond.key());
        let mut path = Vec::new();
        subtrees.push(exp.expand(cond, exp.config.max_depth, &mut path, &prefix));
    }
    Ok(Plan {
        tree: BTNode::sequence("goal", subtrees),
        registry_version: registry.version(),
        depth_warnings: exp.warnings,
    })
}

/// Replans after a registry update and reports what changed.
pub fn replan_after_update(
    goal: &Goal,
    registry: &Registry,
    config: &PlannerConfig,
    previous: &Plan,
) -> Result<(Plan, ChangeSet), PlanError> {
    if registry.version() <= previous.registry_version {
        return Err(PlanError::StaleRegistry);
    }
    let next = plan(goal, registry, config)?;
    let changes = diff(&previous.tree, &next.tree);
    Ok((next, changes))
}
