//! Symbolic world state: typed objects plus a closed-world set of ground
//! facts. Values are immutable from the outside; skill effects in [`crate::sim`]
//! produce new states.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GRIPPER: &str = "gripper";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Peg,
    Hole,
    Cube,
    Door,
    Handle,
    Obstacle,
    Gripper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectInfo {
    pub kind: ObjectKind,
    pub size_class: SizeClass,
    #[serde(default)]
    pub graspable: bool,
    #[serde(default)]
    pub movable: bool,
}

/// A ground predicate, e.g. `in(obstacle_s, hole1)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub pred: String,
    pub args: Vec<String>,
}

impl Fact {
    pub fn new(pred: &str, args: &[&str]) -> Self {
        Fact {
            pred: pred.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.pred, self.args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub objects: BTreeMap<String, ObjectInfo>,
    pub facts: BTreeSet<Fact>,
    #[serde(default)]
    pub step: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorldError {
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("world invariant violated: {0}")]
    InvariantViolation(String),
}

impl WorldState {
    pub fn new() -> Self {
        WorldState {
            objects: BTreeMap::new(),
            facts: BTreeSet::new(),
            step: 0,
        }
    }

    pub fn object(&self, id: &str) -> Result<&ObjectInfo, WorldError> {
        self.objects
            .get(id)
            .ok_or_else(|| WorldError::UnknownObject(id.to_string()))
    }

    pub fn has_object(&self, id: &str) -> bool {
        self.objects.contains_key(id)
    }

    pub fn has_fact(&self, pred: &str, args: &[&str]) -> bool {
        self.facts.contains(&Fact::new(pred, args))
    }

    pub fn facts_with_pred<'a>(&'a self, pred: &'a str) -> impl Iterator<Item = &'a Fact> {
        self.facts.iter().filter(move |f| f.pred == pred)
    }

    /// The object currently held by the gripper, if any.
    pub fn held(&self) -> Option<&str> {
        self.facts_with_pred("holding")
            .next()
            .and_then(|f| f.args.get(1).map(String::as_str))
    }

    /// First object occupying `loc` via an `in`, `blocking` or `on` fact,
    /// in deterministic fact order.
    pub fn occupant(&self, loc: &str) -> Option<&str> {
        self.facts
            .iter()
            .find(|f| {
                matches!(f.pred.as_str(), "in" | "blocking" | "on")
                    && f.args.len() == 2
                    && f.args[1] == loc
            })
            .map(|f| f.args[0].as_str())
    }

    /// Derived predicate: anything `in`/`blocking`/`on` the location.
    pub fn occupied(&self, loc: &str) -> bool {
        self.occupant(loc).is_some()
    }

    pub fn assert_fact(&mut self, fact: Fact) -> Result<(), WorldError> {
        for arg in &fact.args {
            if !self.objects.contains_key(arg) {
                return Err(WorldError::UnknownObject(arg.clone()));
            }
        }
        self.facts.insert(fact);
        Ok(())
    }

    pub fn retract_fact(&mut self, fact: &Fact) {
        self.facts.remove(fact);
    }

    pub fn retract_where(&mut self, keep: impl Fn(&Fact) -> bool) {
        self.facts.retain(|f| keep(f));
    }

    /// Checks the state invariants: closed-world facts only over known
    /// objects, at most one held object, and no foreign object sharing a
    /// hole with an inserted peg.
    pub fn validate(&self) -> Result<(), WorldError> {
        for fact in &self.facts {
            for arg in &fact.args {
                if !self.objects.contains_key(arg) {
                    return Err(WorldError::InvariantViolation(format!(
                        "fact {fact} names unknown object `{arg}`"
                    )));
                }
            }
        }
        let held: Vec<_> = self.facts_with_pred("holding").collect();
        if held.len() > 1 {
            return Err(WorldError::InvariantViolation(format!(
                "gripper holds {} objects",
                held.len()
            )));
        }
        for ins in self.facts_with_pred("inserted") {
            let (peg, hole) = (&ins.args[0], &ins.args[1]);
            for inside in self.facts_with_pred("in") {
                if &inside.args[1] == hole && &inside.args[0] != peg {
                    return Err(WorldError::InvariantViolation(format!(
                        "{} coexists with {}",
                        ins, inside
                    )));
                }
            }
        }
        Ok(())
    }

    /// Equality modulo the step counter, for state-space search.
    pub fn same_situation(&self, other: &WorldState) -> bool {
        self.objects == other.objects && self.facts == other.facts
    }
}

impl Default for WorldState {
    fn default() -> Self {
        Self::new()
    }
}
