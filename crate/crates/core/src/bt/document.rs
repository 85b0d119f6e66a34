//! BT document format: JSON with fields `kind`, `node_id`, `children`,
//! `condition {name, args}`, `skill {name, args}`. Round-trips are exact,
//! including node ids. See docs/formats.md for the published schema.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{BTNode, NodeKind};
use crate::types::GroundRef;

#[derive(Debug, Error)]
pub enum DocError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
}

#[derive(Serialize, Deserialize)]
struct RawNode {
    kind: String,
    node_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<RawNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition: Option<GroundRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    skill: Option<GroundRef>,
}

fn to_raw(node: &BTNode) -> RawNode {
    let (kind, condition, skill) = match &node.kind {
        NodeKind::Sequence(_) => ("Sequence", None, None),
        NodeKind::Fallback(_) => ("Fallback", None, None),
        NodeKind::Condition(c) => ("Condition", Some(c.clone()), None),
        NodeKind::Skill(s) => ("Skill", None, Some(s.clone())),
    };
    RawNode {
        kind: kind.to_string(),
        node_id: node.id.clone(),
        children: node.children().iter().map(to_raw).collect(),
        condition,
        skill,
    }
}

fn from_raw(raw: RawNode) -> Result<BTNode, DocError> {
    let RawNode {
        kind,
        node_id,
        children,
        condition,
        skill,
    } = raw;
    let built = match kind.as_str() {
        "Sequence" | "Fallback" => {
            if condition.is_some() || skill.is_some() {
                return Err(DocError::Schema(format!(
                    "control node `{node_id}` carries a leaf reference"
                )));
            }
            if children.is_empty() {
                return Err(DocError::Schema(format!(
                    "{kind} node `{node_id}` has no children"
                )));
            }
            let kids = children
                .into_iter()
                .map(from_raw)
                .collect::<Result<Vec<_>, _>>()?;
            if kind == "Sequence" {
                BTNode::sequence(node_id, kids)
            } else {
                BTNode::fallback(node_id, kids)
            }
        }
        "Condition" => {
            if !children.is_empty() {
                return Err(DocError::Schema(format!(
                    "leaf node `{node_id}` has children"
                )));
            }
            let c = condition.ok_or_else(|| {
                DocError::Schema(format!("Condition node `{node_id}` lacks `condition`"))
            })?;
            BTNode::condition(node_id, c)
        }
        "Skill" => {
            if !children.is_empty() {
                return Err(DocError::Schema(format!(
                    "leaf node `{node_id}` has children"
                )));
            }
            let s = skill.ok_or_else(|| {
                DocError::Schema(format!("Skill node `{node_id}` lacks `skill`"))
            })?;
            BTNode::skill(node_id, s)
        }
        other => {
            return Err(DocError::Schema(format!(
                "unsupported node kind `{other}`"
            )))
        }
    };
    Ok(built)
}

pub fn to_document(tree: &BTNode) -> String {
    serde_json::to_string_pretty(&to_raw(tree)).expect("BT serialization cannot fail")
}

pub fn from_document(text: &str) -> Result<BTNode, DocError> {
    // Two-stage parse so syntax errors carry a location while shape errors
    // become SchemaError.
    let value: Value = serde_json::from_str(text).map_err(|e| DocError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let raw: RawNode = serde_json::from_value(value)
        .map_err(|e| DocError::Schema(e.to_string()))?;
    let tree = from_raw(raw)?;
    tree.validate()
        .map_err(|e| DocError::Schema(e.to_string()))?;
    Ok(tree)
}
