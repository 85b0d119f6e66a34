//! Execution monitor: runs a planned tree against the simulator, detects
//! failures by checking declared skill postconditions, consults the
//! advisor, applies the suggested registry updates, and replans — then
//! restarts ticking on the regenerated tree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisor::{
    Advisor, AdvisorError, AdvisorQuery, AdvisorVerdict, ConditionMeaning, MissingCondition,
    Recovery,
};
use crate::bt::{tick, to_document, BTNode, ChangeSet, SkillExecutor, TickError};
use crate::planner::{plan, replan_after_update, Plan, PlanError, PlannerConfig};
use crate::registry::{
    CondRef, Condition, Feasibility, ParamSlot, Registry, RegistryError, SkillSpec,
    TemplateCompletion,
};
use crate::sim::{
    apply_skill, snapshot, Scenario, ScenarioError, SimError, SkillOutcome, KNOWN_EFFECTS,
};
use crate::types::{normalize_name, GroundRef};
use crate::world::WorldState;
use crate::bt::NodeStatus;

pub const BUILTIN_COMPLETIONS: &str = include_str!("../data/completions.json");

/// A skill instance whose declared postconditions did not hold after
/// execution, with the world as it was at that moment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureReport {
    pub skill: GroundRef,
    pub violated_postconditions: Vec<GroundRef>,
    pub world_at_failure: WorldState,
    pub tick_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    GoalReached,
    FailedUnrecovered,
    TickBudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub skill: GroundRef,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryRecord {
    pub verdict: AdvisorVerdict,
    /// Suggestions the feasibility gate turned down before this verdict.
    pub rejections: Vec<Rejection>,
    pub registry_mutations: Vec<String>,
    pub change_set: ChangeSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub scenario: String,
    pub advisor: String,
    pub outcome: Outcome,
    pub ticks_used: u64,
    pub failures: Vec<FailureReport>,
    pub recoveries: Vec<RecoveryRecord>,
    pub pre_check: Option<AdvisorVerdict>,
    pub notes: Vec<String>,
    pub final_world: WorldState,
}

#[derive(Debug, Clone)]
pub struct MonitorConfig {
    pub max_recoveries: usize,
    pub tick_budget: u64,
    pub feasibility_gate: bool,
    pub pre_check: bool,
    /// Keep executing when the pre-execution advisor query errors out.
    pub proceed_without_advisor: bool,
    pub planner: PlannerConfig,
    /// Template completions by template name, for unattended instantiation.
    pub completions: BTreeMap<String, TemplateCompletion>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            max_recoveries: 3,
            tick_budget: 50,
            feasibility_gate: true,
            pre_check: true,
            proceed_without_advisor: true,
            planner: PlannerConfig::default(),
            completions: serde_json::from_str(BUILTIN_COMPLETIONS)
                .expect("embedded completions must be valid"),
        }
    }
}

impl MonitorConfig {
    pub fn load_completions(&mut self, path: &str) -> Result<(), MonitorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MonitorError::Completions(e.to_string()))?;
        let extra: BTreeMap<String, TemplateCompletion> =
            serde_json::from_str(&text).map_err(|e| MonitorError::Completions(e.to_string()))?;
        self.completions.extend(extra);
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Tick(#[from] TickError),
    #[error(transparent)]
    Advisor(#[from] AdvisorError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("advisor offered no recovery suggestion")]
    NoSuggestion,
    #[error("recovery infeasible after re-query: {0}")]
    InfeasibleRecovery(String),
    #[error("recovery suggestion changes nothing in the registry")]
    RecoveryStalled,
    #[error("condition `{0}` is new but the verdict carries no meaning for it")]
    MissingMeaning(String),
    #[error("invalid recovery suggestion: {0}")]
    InvalidRecovery(String),
    #[error("completions file error: {0}")]
    Completions(String),
}

/// Postcondition check after a skill executed: reports exactly the
/// declared postconditions that evaluate false in the resulting world.
pub fn detect_failure(
    skill: &SkillSpec,
    args: &[String],
    world_after: &WorldState,
    registry: &Registry,
    tick_index: u64,
) -> Option<FailureReport> {
    let mut violated = Vec::new();
    for post in &skill.postconditions {
        let ground = post.resolve(&skill.params, args).ok()?;
        match registry.evaluate_ground(&ground, world_after) {
            Ok(true) => {}
            Ok(false) => violated.push(ground),
            Err(_) => violated.push(ground),
        }
    }
    if violated.is_empty() {
        return None;
    }
    Some(FailureReport {
        skill: GroundRef {
            name: skill.name.clone(),
            args: args.to_vec(),
        },
        violated_postconditions: violated,
        world_at_failure: world_after.clone(),
        tick_index,
    })
}

/// Tick-engine hookup: conditions evaluate through the registry, skill
/// leaves run the simulator and record outcomes and failures.
pub struct SessionExecutor<'a> {
    registry: &'a Registry,
    tick_index: u64,
    pub failures: Vec<FailureReport>,
    pub executions: Vec<(GroundRef, SkillOutcome)>,
}

impl<'a> SessionExecutor<'a> {
    pub fn new(registry: &'a Registry, tick_index: u64) -> Self {
        SessionExecutor {
            registry,
            tick_index,
            failures: Vec::new(),
            executions: Vec::new(),
        }
    }
}

impl SkillExecutor for SessionExecutor<'_> {
    fn eval_condition(&mut self, cond: &GroundRef, world: &WorldState) -> Result<bool, TickError> {
        self.registry.evaluate_ground(cond, world).map_err(|e| match e {
            RegistryError::UnknownCondition(name) => TickError::UnknownReference(name),
            other => TickError::Eval(other.to_string()),
        })
    }

    fn execute_skill(
        &mut self,
        skill: &GroundRef,
        world: &mut WorldState,
    ) -> Result<NodeStatus, TickError> {
        let spec = self
            .registry
            .skill(&skill.name)
            .ok_or_else(|| TickError::UnknownReference(skill.name.clone()))?;
        let (next, outcome) = apply_skill(world, spec, &skill.args)
            .map_err(|e| TickError::Eval(e.to_string()))?;
        *world = next;
        if let Some(report) =
            detect_failure(spec, &skill.args, world, self.registry, self.tick_index)
        {
            self.failures.push(report);
        }
        let status = if outcome.fired {
            NodeStatus::Success
        } else {
            NodeStatus::Failure
        };
        self.executions.push((skill.clone(), outcome));
        Ok(status)
    }
}

fn build_query(
    task: &str,
    tree: &BTNode,
    world: &WorldState,
    registry: &Registry,
    advisor: &dyn Advisor,
    failure: Option<FailureReport>,
) -> AdvisorQuery {
    let (skill_summary, condition_summary) = AdvisorQuery::summaries_from(registry);
    AdvisorQuery {
        scene: snapshot(world, advisor.detail(), task),
        image_refs: Vec::new(),
        bt_document: to_document(tree),
        skill_summary,
        condition_summary,
        failure,
        feasibility_feedback: None,
    }
}

/// Queries the advisor before execution starts. The verdict is advisory:
/// it is logged in the report, not acted on.
pub fn pre_execution_check(
    tree: &BTNode,
    world: &WorldState,
    registry: &Registry,
    advisor: &dyn Advisor,
    task: &str,
) -> Result<AdvisorVerdict, AdvisorError> {
    let query = build_query(task, tree, world, registry, advisor, None);
    let verdict = advisor.advise(&query)?;
    verdict.validate()?;
    Ok(verdict)
}

fn condition_from_meaning(
    name: &str,
    args: &[String],
    meaning: &ConditionMeaning,
    world: &WorldState,
) -> Condition {
    let params = args
        .iter()
        .enumerate()
        .map(|(i, arg)| {
            let ty = world
                .objects
                .get(arg)
                .map(|info| format!("{:?}", info.kind).to_lowercase())
                .unwrap_or_else(|| "object".to_string());
            ParamSlot {
                name: format!("p{i}"),
                ty,
            }
        })
        .collect();
    let pattern = meaning
        .pattern
        .iter()
        .map(|entry| {
            if let Some(idx) = entry.strip_prefix('$') {
                format!("$p{idx}")
            } else {
                entry.clone()
            }
        })
        .collect();
    Condition {
        name: name.to_string(),
        params,
        negated: meaning.negated,
        predicate: meaning.predicate.clone(),
        pattern,
    }
}

/// Maps the missing condition's ground args onto a skill's parameters by
/// position, yielding the `$param` reference list for registration.
fn positional_cond_ref(
    cond_name: &str,
    cond_args: &[String],
    params: &[ParamSlot],
) -> Result<CondRef, MonitorError> {
    if cond_args.len() != params.len() {
        return Err(MonitorError::InvalidRecovery(format!(
            "condition `{cond_name}` has {} args but the skill takes {} params",
            cond_args.len(),
            params.len()
        )));
    }
    Ok(CondRef {
        name: cond_name.to_string(),
        args: params.iter().map(|p| format!("${}", p.name)).collect(),
    })
}

struct GateDecision {
    rejections: Vec<Rejection>,
    verdict: AdvisorVerdict,
}

/// One recovery round: gate the suggestion, mutate the registry, replan.
fn recover_round(
    scenario: &Scenario,
    advisor: &dyn Advisor,
    config: &MonitorConfig,
    registry: &mut Registry,
    previous: &Plan,
    failure: &FailureReport,
) -> Result<(Plan, RecoveryRecord), MonitorError> {
    let mut query = build_query(
        &scenario.name,
        &previous.tree,
        &failure.world_at_failure,
        registry,
        advisor,
        Some(failure.clone()),
    );
    let mut verdict = advisor.advise(&query)?;
    verdict.validate()?;

    // Feasibility gate with one advisor re-query on rejection.
    let decision = {
        let mut rejections = Vec::new();
        loop {
            if !config.feasibility_gate {
                break GateDecision {
                    rejections,
                    verdict,
                };
            }
            let missing = verdict
                .missing_condition
                .as_ref()
                .ok_or(MonitorError::NoSuggestion)?;
            let Some(recovery) = &verdict.recovery else {
                break GateDecision {
                    rejections,
                    verdict,
                };
            };
            let (spec, args) = gate_instance(recovery, missing, registry, config)?;
            match registry.check_feasibility(&spec, &args, &failure.world_at_failure)? {
                Feasibility::Feasible => {
                    break GateDecision {
                        rejections,
                        verdict,
                    }
                }
                Feasibility::Infeasible(reason) => {
                    rejections.push(Rejection {
                        skill: GroundRef {
                            name: spec.name.clone(),
                            args,
                        },
                        reason: reason.clone(),
                    });
                    if rejections.len() > 1 {
                        return Err(MonitorError::InfeasibleRecovery(reason));
                    }
                    query.feasibility_feedback = Some(reason);
                    verdict = advisor.advise(&query)?;
                    verdict.validate()?;
                }
            }
        }
    };
    let verdict = decision.verdict;
    let mutations = apply_verdict_mutations(registry, &verdict, failure, config)?;
    if mutations.is_empty() {
        return Err(MonitorError::RecoveryStalled);
    }
    let (next, change_set) =
        replan_after_update(&scenario.goal, registry, &config.planner, previous)?;
    Ok((
        next,
        RecoveryRecord {
            verdict,
            rejections: decision.rejections,
            registry_mutations: mutations,
            change_set,
        },
    ))
}

/// Applies a verdict's registry updates: register the missing condition
/// if new, attach it as a precondition, and ensure an achiever exists.
/// Returns the mutation log.
pub fn apply_verdict_mutations(
    registry: &mut Registry,
    verdict: &AdvisorVerdict,
    failure: &FailureReport,
    config: &MonitorConfig,
) -> Result<Vec<String>, MonitorError> {
    let missing = verdict
        .missing_condition
        .as_ref()
        .ok_or(MonitorError::NoSuggestion)?;
    let cond_name = normalize_name(&missing.name);
    let mut mutations = Vec::new();

    if registry.condition(&cond_name).is_none() {
        let meaning = missing
            .meaning
            .as_ref()
            .ok_or_else(|| MonitorError::MissingMeaning(cond_name.clone()))?;
        let condition = condition_from_meaning(
            &cond_name,
            &missing.args,
            meaning,
            &failure.world_at_failure,
        );
        registry.register_condition(condition, false)?;
        mutations.push(format!("register_condition {cond_name}"));
    }

    // Attach the condition as a precondition of the named skill, with
    // args generalized to the skill's parameters via the failed instance.
    let attach_skill = registry
        .skill(&missing.attach_to_skill)
        .ok_or_else(|| {
            MonitorError::InvalidRecovery(format!(
                "attach_to_skill `{}` is not registered",
                missing.attach_to_skill
            ))
        })?
        .clone();
    let attach_args: Vec<String> = missing
        .args
        .iter()
        .map(|arg| {
            if failure.skill.name == attach_skill.name {
                if let Some(pos) = failure.skill.args.iter().position(|a| a == arg) {
                    return format!("${}", attach_skill.params[pos].name);
                }
            }
            arg.clone()
        })
        .collect();
    let attach = CondRef {
        name: cond_name.clone(),
        args: attach_args,
    };
    // new preconditions go first so recovery runs before the skill's
    // original approach phase
    if registry.add_precondition(&attach_skill.name, attach, true)? {
        mutations.push(format!(
            "attach_precondition {} <- {}",
            attach_skill.name, cond_name
        ));
    }

    match &verdict.recovery {
        None => {}
        Some(Recovery::Existing { skill }) => {
            let spec = registry
                .skill(skill)
                .ok_or_else(|| {
                    MonitorError::InvalidRecovery(format!("skill `{skill}` is not registered"))
                })?
                .clone();
            let post = positional_cond_ref(&cond_name, &missing.args, &spec.params)?;
            if registry.add_postcondition(skill, post)? {
                mutations.push(format!("attach_postcondition {skill} <- {cond_name}"));
            }
        }
        Some(Recovery::Template { template }) => {
            let spec = instantiate_recovery(template, missing, &cond_name, registry, config)?;
            if registry.skill(&spec.name).is_none() {
                let name = spec.name.clone();
                registry.register_skill(spec, false)?;
                mutations.push(format!("register_skill {name}"));
            } else {
                let existing = registry.skill(&spec.name).unwrap().clone();
                let post = positional_cond_ref(&cond_name, &missing.args, &existing.params)?;
                if registry.add_postcondition(&spec.name, post)? {
                    mutations.push(format!(
                        "attach_postcondition {} <- {cond_name}",
                        spec.name
                    ));
                }
            }
        }
    }

    Ok(mutations)
}

/// Resolves the skill instance the feasibility gate should check.
fn gate_instance(
    recovery: &Recovery,
    missing: &MissingCondition,
    registry: &Registry,
    config: &MonitorConfig,
) -> Result<(SkillSpec, Vec<String>), MonitorError> {
    let cond_name = normalize_name(&missing.name);
    let spec = match recovery {
        Recovery::Existing { skill } => registry
            .skill(skill)
            .ok_or_else(|| {
                MonitorError::InvalidRecovery(format!("skill `{skill}` is not registered"))
            })?
            .clone(),
        Recovery::Template { template } => {
            instantiate_recovery(template, missing, &cond_name, registry, config)?
        }
    };
    if missing.args.len() != spec.params.len() {
        return Err(MonitorError::InvalidRecovery(format!(
            "recovery skill `{}` takes {} params but the condition binds {}",
            spec.name,
            spec.params.len(),
            missing.args.len()
        )));
    }
    Ok((spec.clone(), missing.args.clone()))
}

fn instantiate_recovery(
    template: &crate::registry::SkillTemplate,
    missing: &MissingCondition,
    cond_name: &str,
    _registry: &Registry,
    config: &MonitorConfig,
) -> Result<SkillSpec, MonitorError> {
    let mut completion = config
        .completions
        .get(&template.name)
        .cloned()
        .unwrap_or_default();
    // the "achieves" hole is derivable from the identified condition
    completion.holes.entry("achieves".to_string()).or_insert(
        positional_cond_ref(cond_name, &missing.args, &template.params)?,
    );
    Ok(Registry::instantiate_template(
        template,
        &completion,
        KNOWN_EFFECTS,
    )?)
}

/// The full monitored execution loop for one scenario.
pub fn execute_with_monitoring(
    scenario: &Scenario,
    advisor: &dyn Advisor,
    config: &MonitorConfig,
) -> Result<ExecutionReport, MonitorError> {
    let registry = scenario.build_registry()?;
    execute_prepared(scenario, registry, advisor, config)
}

/// Monitored execution with a caller-supplied registry, e.g. one that
/// already carries learned recoveries.
pub fn execute_prepared(
    scenario: &Scenario,
    registry: Registry,
    advisor: &dyn Advisor,
    config: &MonitorConfig,
) -> Result<ExecutionReport, MonitorError> {
    let mut registry = registry;
    let mut current = plan(&scenario.goal, &registry, &config.planner)?;
    let mut world = scenario.initial.clone();

    let mut notes = Vec::new();
    let mut pre_check = None;
    if config.pre_check {
        match pre_execution_check(&current.tree, &world, &registry, advisor, &scenario.name) {
            Ok(verdict) => pre_check = Some(verdict),
            Err(err) => {
                notes.push(format!("pre-execution check unavailable: {err}"));
                if !config.proceed_without_advisor {
                    return Err(err.into());
                }
            }
        }
    }

    let mut ticks_used = 0u64;
    let mut failures: Vec<FailureReport> = Vec::new();
    let mut recoveries: Vec<RecoveryRecord> = Vec::new();

    let outcome = loop {
        if ticks_used >= config.tick_budget {
            break Outcome::TickBudgetExhausted;
        }
        let mut executor = SessionExecutor::new(&registry, ticks_used);
        let (status, _trace) = tick(&current.tree, &mut world, &mut executor, ticks_used)?;
        ticks_used += 1;
        let tick_failures = executor.failures;
        failures.extend(tick_failures.iter().cloned());

        match status {
            NodeStatus::Running => continue,
            NodeStatus::Success => {
                // independent goal re-verification
                let reached = scenario
                    .goal
                    .conditions
                    .iter()
                    .all(|c| registry.evaluate_ground(c, &world).unwrap_or(false));
                if reached {
                    break Outcome::GoalReached;
                }
                notes.push("tree succeeded but the goal does not hold".to_string());
                break Outcome::FailedUnrecovered;
            }
            NodeStatus::Failure => {
                let Some(failure) = tick_failures.into_iter().next() else {
                    notes.push("tree failed without a skill failure".to_string());
                    break Outcome::FailedUnrecovered;
                };
                if recoveries.len() >= config.max_recoveries {
                    notes.push("recovery budget exhausted".to_string());
                    break Outcome::FailedUnrecovered;
                }
                match recover_round(scenario, advisor, config, &mut registry, &current, &failure) {
                    Ok((next, record)) => {
                        recoveries.push(record);
                        current = next;
                        // execution restarts from scratch on the new tree
                        continue;
                    }
                    Err(err) => {
                        notes.push(format!("recovery failed: {err}"));
                        break Outcome::FailedUnrecovered;
                    }
                }
            }
        }
    };

    Ok(ExecutionReport {
        scenario: scenario.name.clone(),
        advisor: advisor.name().to_string(),
        outcome,
        ticks_used,
        failures,
        recoveries,
        pre_check,
        notes,
        final_world: world,
    })
}
