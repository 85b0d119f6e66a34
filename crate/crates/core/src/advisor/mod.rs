//! Advisor protocol: the structured query/verdict exchange between the
//! execution monitor and whatever answers failure questions — the
//! deterministic rule-based mock, or an external VLM/LLM endpoint.

pub mod llm;
pub mod mock;

pub use llm::{LlmAdvisor, LlmConfig};
pub use mock::{MockAdvisor, MockMode};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monitor::FailureReport;
use crate::registry::{ParamSlot, Registry, SkillTemplate};
use crate::sim::{SceneDescription, SnapshotDetail};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSummary {
    pub name: String,
    pub params: Vec<ParamSlot>,
    pub preconditions: Vec<String>,
    pub postconditions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub name: String,
    pub params: Vec<ParamSlot>,
}

/// Everything an advisor gets to reason over: scene, tree, registry
/// summaries, and (at failure time) the failure report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvisorQuery {
    pub scene: SceneDescription,
    #[serde(default)]
    pub image_refs: Vec<PathBuf>,
    pub bt_document: String,
    pub skill_summary: Vec<SkillSummary>,
    pub condition_summary: Vec<ConditionSummary>,
    #[serde(default)]
    pub failure: Option<FailureReport>,
    /// Rejection reason from a prior feasibility-gated round, if any.
    #[serde(default)]
    pub feasibility_feedback: Option<String>,
}

impl AdvisorQuery {
    pub fn summaries_from(registry: &Registry) -> (Vec<SkillSummary>, Vec<ConditionSummary>) {
        let skills = registry
            .skills()
            .map(|s| SkillSummary {
                name: s.name.clone(),
                params: s.params.clone(),
                preconditions: s
                    .preconditions
                    .iter()
                    .map(|c| format!("{}({})", c.name, c.args.join(",")))
                    .collect(),
                postconditions: s
                    .postconditions
                    .iter()
                    .map(|c| format!("{}({})", c.name, c.args.join(",")))
                    .collect(),
            })
            .collect();
        let conditions = registry
            .conditions()
            .map(|c| ConditionSummary {
                name: c.name.clone(),
                params: c.params.clone(),
            })
            .collect();
        (skills, conditions)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "prediction", rename_all = "snake_case")]
pub enum Prediction {
    WillSucceed,
    WillFail { cause: String },
}

/// How a proposed condition is evaluated against the world: a (possibly
/// negated) predicate pattern whose entries are `"*"`, positional `"$0"`
/// argument references, or literals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionMeaning {
    pub predicate: String,
    pub pattern: Vec<String>,
    #[serde(default)]
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingCondition {
    pub name: String,
    #[serde(default)]
    pub args: Vec<String>,
    pub attach_to_skill: String,
    /// Required when the condition is not already registered.
    #[serde(default)]
    pub meaning: Option<ConditionMeaning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Recovery {
    Existing { skill: String },
    Template { template: SkillTemplate },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvisorVerdict {
    #[serde(flatten)]
    pub prediction: Prediction,
    #[serde(default)]
    pub missing_condition: Option<MissingCondition>,
    #[serde(default)]
    pub recovery: Option<Recovery>,
}

impl AdvisorVerdict {
    pub fn will_succeed() -> Self {
        AdvisorVerdict {
            prediction: Prediction::WillSucceed,
            missing_condition: None,
            recovery: None,
        }
    }

    pub fn predicts_success(&self) -> bool {
        matches!(self.prediction, Prediction::WillSucceed)
    }

    /// Protocol invariant: a failure prediction must identify the missing
    /// condition.
    pub fn validate(&self) -> Result<(), AdvisorError> {
        if matches!(self.prediction, Prediction::WillFail { .. })
            && self.missing_condition.is_none()
        {
            return Err(AdvisorError::MalformedResponse(
                "verdict predicts failure but names no missing condition".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AdvisorError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed advisor response: {0}")]
    MalformedResponse(String),
    #[error("advisor unavailable: {0}")]
    Unavailable(String),
    #[error("advisor configuration error: {0}")]
    Config(String),
}

/// Strict boundary validation for advisor responses. Accepts raw JSON or
/// a fenced code block containing it.
pub fn parse_verdict(text: &str) -> Result<AdvisorVerdict, AdvisorError> {
    let body = extract_json(text);
    let verdict: AdvisorVerdict = serde_json::from_str(body)
        .map_err(|e| AdvisorError::MalformedResponse(e.to_string()))?;
    verdict.validate()?;
    Ok(verdict)
}

fn extract_json(text: &str) -> &str {
    let trimmed = text.trim();
    if let Some(stripped) = trimmed.strip_prefix("```") {
        let stripped = stripped.strip_prefix("json").unwrap_or(stripped);
        if let Some(end) = stripped.rfind("```") {
            return stripped[..end].trim();
        }
    }
    trimmed
}

/// Baseline advisor: always predicts success and suggests nothing, which
/// disables recovery entirely.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullAdvisor;

pub trait Advisor {
    fn advise(&self, query: &AdvisorQuery) -> Result<AdvisorVerdict, AdvisorError>;

    /// Scene detail this advisor wants in its queries.
    fn detail(&self) -> SnapshotDetail {
        SnapshotDetail::Full
    }

    fn name(&self) -> &'static str;
}

impl Advisor for NullAdvisor {
    fn advise(&self, _query: &AdvisorQuery) -> Result<AdvisorVerdict, AdvisorError> {
        Ok(AdvisorVerdict::will_succeed())
    }

    fn name(&self) -> &'static str {
        "null"
    }
}
