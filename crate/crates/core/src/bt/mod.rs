//! Behavior tree data model and reactive tick semantics.
//!
//! Trees are immutable once built. Every tick re-evaluates from the root
//! (memoryless control nodes): a Sequence is an ordered AND, a Fallback an
//! ordered OR, condition leaves are read-only checks, skill leaves delegate
//! to a [`SkillExecutor`].

pub mod diff;
pub mod document;

pub use diff::{diff, to_dot, ChangeSet};
pub use document::{from_document, to_document, DocError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::GroundRef;
use crate::world::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeStatus {
    Success,
    Failure,
    Running,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BTNode {
    pub id: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Sequence(Vec<BTNode>),
    Fallback(Vec<BTNode>),
    Condition(GroundRef),
    Skill(GroundRef),
}

impl BTNode {
    pub fn sequence(id: impl Into<String>, children: Vec<BTNode>) -> Self {
        BTNode {
            id: id.into(),
            kind: NodeKind::Sequence(children),
        }
    }

    pub fn fallback(id: impl Into<String>, children: Vec<BTNode>) -> Self {
        BTNode {
            id: id.into(),
            kind: NodeKind::Fallback(children),
        }
    }

    pub fn condition(id: impl Into<String>, cond: GroundRef) -> Self {
        BTNode {
            id: id.into(),
            kind: NodeKind::Condition(cond),
        }
    }

    pub fn skill(id: impl Into<String>, skill: GroundRef) -> Self {
        BTNode {
            id: id.into(),
            kind: NodeKind::Skill(skill),
        }
    }

    pub fn children(&self) -> &[BTNode] {
        match &self.kind {
            NodeKind::Sequence(c) | NodeKind::Fallback(c) => c,
            _ => &[],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Condition(_) | NodeKind::Skill(_))
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            NodeKind::Sequence(_) => "Sequence",
            NodeKind::Fallback(_) => "Fallback",
            NodeKind::Condition(_) => "Condition",
            NodeKind::Skill(_) => "Skill",
        }
    }

    /// Depth-first pre-order walk.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a BTNode)) {
        visit(self);
        for child in self.children() {
            child.walk(visit);
        }
    }

    pub fn find(&self, id: &str) -> Option<&BTNode> {
        if self.id == id {
            return Some(self);
        }
        self.children().iter().find_map(|c| c.find(id))
    }

    /// Structural well-formedness: control nodes have children, ids unique.
    pub fn validate(&self) -> Result<(), TickError> {
        let mut seen = std::collections::BTreeSet::new();
        let mut err = None;
        self.walk(&mut |n| {
            if err.is_some() {
                return;
            }
            if !seen.insert(n.id.as_str()) {
                err = Some(TickError::MalformedTree(format!(
                    "duplicate node id `{}`",
                    n.id
                )));
            }
            if !n.is_leaf() && n.children().is_empty() {
                err = Some(TickError::MalformedTree(format!(
                    "{} node `{}` has no children",
                    n.kind_name(),
                    n.id
                )));
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Executes skill leaves and evaluates condition leaves for the tick engine.
pub trait SkillExecutor {
    fn eval_condition(
        &mut self,
        cond: &GroundRef,
        world: &WorldState,
    ) -> Result<bool, TickError>;

    fn execute_skill(
        &mut self,
        skill: &GroundRef,
        world: &mut WorldState,
    ) -> Result<NodeStatus, TickError>;
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TickError {
    #[error("unknown reference `{0}`")]
    UnknownReference(String),
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("evaluation error: {0}")]
    Eval(String),
}

/// The nodes visited by one tick, in depth-first order, with the status
/// each node settled on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickTrace {
    pub tick_index: u64,
    pub visits: Vec<(String, NodeStatus)>,
}

/// One reactive tick from the root.
pub fn tick(
    tree: &BTNode,
    world: &mut WorldState,
    executor: &mut dyn SkillExecutor,
    tick_index: u64,
) -> Result<(NodeStatus, TickTrace), TickError> {
    let mut trace = TickTrace {
        tick_index,
        visits: Vec::new(),
    };
    let status = tick_node(tree, world, executor, &mut trace)?;
    Ok((status, trace))
}

fn tick_node(
    node: &BTNode,
    world: &mut WorldState,
    executor: &mut dyn SkillExecutor,
    trace: &mut TickTrace,
) -> Result<NodeStatus, TickError> {
    let slot = trace.visits.len();
    trace.visits.push((node.id.clone(), NodeStatus::Running));
    let status = match &node.kind {
        NodeKind::Sequence(children) => {
            if children.is_empty() {
                return Err(TickError::MalformedTree(format!(
                    "Sequence node `{}` has no children",
                    node.id
                )));
            }
            let mut status = NodeStatus::Success;
            for child in children {
                match tick_node(child, world, executor, trace)? {
                    NodeStatus::Success => continue,
                    other => {
                        status = other;
                        break;
                    }
                }
            }
            status
        }
        NodeKind::Fallback(children) => {
            if children.is_empty() {
                return Err(TickError::MalformedTree(format!(
                    "Fallback node `{}` has no children",
                    node.id
                )));
            }
            let mut status = NodeStatus::Failure;
            for child in children {
                match tick_node(child, world, executor, trace)? {
                    NodeStatus::Failure => continue,
                    other => {
                        status = other;
                        break;
                    }
                }
            }
            status
        }
        NodeKind::Condition(cond) => {
            if executor.eval_condition(cond, world)? {
                NodeStatus::Success
            } else {
                NodeStatus::Failure
            }
        }
        NodeKind::Skill(skill) => executor.execute_skill(skill, world)?,
    };
    trace.visits[slot].1 = status;
    Ok(status)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use std::collections::BTreeMap;

    /// Table-driven executor for engine tests: condition names map to
    /// booleans, skill names to fixed statuses.
    #[derive(Default)]
    pub struct StubExecutor {
        pub conditions: BTreeMap<String, bool>,
        pub skills: BTreeMap<String, NodeStatus>,
        pub executed: Vec<String>,
    }

    impl SkillExecutor for StubExecutor {
        fn eval_condition(
            &mut self,
            cond: &GroundRef,
            _world: &WorldState,
        ) -> Result<bool, TickError> {
            self.conditions
                .get(&cond.name)
                .copied()
                .ok_or_else(|| TickError::UnknownReference(cond.name.clone()))
        }

        fn execute_skill(
            &mut self,
            skill: &GroundRef,
            _world: &mut WorldState,
        ) -> Result<NodeStatus, TickError> {
            self.executed.push(skill.name.clone());
            self.skills
                .get(&skill.name)
                .copied()
                .ok_or_else(|| TickError::UnknownReference(skill.name.clone()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::StubExecutor;
    use super::*;

    fn cond(id: &str, name: &str) -> BTNode {
        BTNode::condition(id, GroundRef::new(name, &[]))
    }

    fn skill(id: &str, name: &str) -> BTNode {
        BTNode::skill(id, GroundRef::new(name, &[]))
    }

    #[test]
    fn sequence_of_true_conditions_succeeds() {
        let tree = BTNode::sequence("root", vec![cond("a", "c1"), cond("b", "c2")]);
        let mut exec = StubExecutor::default();
        exec.conditions.insert("c1".into(), true);
        exec.conditions.insert("c2".into(), true);
        let mut world = WorldState::new();
        let (status, trace) = tick(&tree, &mut world, &mut exec, 0).unwrap();
        assert_eq!(status, NodeStatus::Success);
        assert_eq!(trace.visits[0].0, "root");
        assert_eq!(trace.visits.len(), 3);
    }

    #[test]
    fn fallback_returns_first_non_failure() {
        let tree = BTNode::fallback("root", vec![cond("a", "c1"), skill("b", "s1")]);
        let mut exec = StubExecutor::default();
        exec.conditions.insert("c1".into(), false);
        exec.skills.insert("s1".into(), NodeStatus::Running);
        let mut world = WorldState::new();
        let (status, _) = tick(&tree, &mut world, &mut exec, 0).unwrap();
        assert_eq!(status, NodeStatus::Running);
    }

    #[test]
    fn sequence_stops_at_first_failure() {
        let tree = BTNode::sequence(
            "root",
            vec![cond("a", "c1"), cond("b", "c2"), skill("c", "s1")],
        );
        let mut exec = StubExecutor::default();
        exec.conditions.insert("c1".into(), true);
        exec.conditions.insert("c2".into(), false);
        exec.skills.insert("s1".into(), NodeStatus::Success);
        let mut world = WorldState::new();
        let (status, trace) = tick(&tree, &mut world, &mut exec, 0).unwrap();
        assert_eq!(status, NodeStatus::Failure);
        assert!(exec.executed.is_empty());
        assert_eq!(trace.visits.last().unwrap().0, "b");
    }

    #[test]
    fn unknown_reference_is_an_error() {
        let tree = cond("a", "nope");
        let mut exec = StubExecutor::default();
        let mut world = WorldState::new();
        let err = tick(&tree, &mut world, &mut exec, 0).unwrap_err();
        assert_eq!(err, TickError::UnknownReference("nope".into()));
    }

    #[test]
    fn empty_control_node_rejected() {
        let tree = BTNode::sequence("root", vec![]);
        assert!(tree.validate().is_err());
        let mut exec = StubExecutor::default();
        let mut world = WorldState::new();
        assert!(matches!(
            tick(&tree, &mut world, &mut exec, 0),
            Err(TickError::MalformedTree(_))
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let tree = BTNode::sequence("root", vec![cond("x", "c"), cond("x", "c")]);
        assert!(matches!(tree.validate(), Err(TickError::MalformedTree(_))));
    }
}
