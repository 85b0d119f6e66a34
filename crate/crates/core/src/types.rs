//! Shared ground references: a name applied to concrete arguments,
//! e.g. `inserted(peg,hole1)`. Used for condition/skill leaves, goals,
//! and failure reports alike.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A named symbol bound to ground (constant) arguments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundRef {
    pub name: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl GroundRef {
    pub fn new(name: impl Into<String>, args: &[&str]) -> Self {
        GroundRef {
            name: name.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }

    /// Canonical `name(a,b)` key, also used for planner node ids.
    pub fn key(&self) -> String {
        self.to_string()
    }

    /// Parses `name` or `name(a,b)`.
    pub fn parse(text: &str) -> Result<Self, ParseRefError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(ParseRefError::Empty);
        }
        match text.find('(') {
            None => {
                check_ident(text)?;
                Ok(GroundRef {
                    name: text.to_string(),
                    args: Vec::new(),
                })
            }
            Some(open) => {
                if !text.ends_with(')') {
                    return Err(ParseRefError::Unbalanced(text.to_string()));
                }
                let name = &text[..open];
                check_ident(name)?;
                let inner = &text[open + 1..text.len() - 1];
                let args = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner
                        .split(',')
                        .map(|a| {
                            let a = a.trim();
                            check_ident(a)?;
                            Ok(a.to_string())
                        })
                        .collect::<Result<Vec<_>, ParseRefError>>()?
                };
                Ok(GroundRef {
                    name: name.to_string(),
                    args,
                })
            }
        }
    }
}

fn check_ident(s: &str) -> Result<(), ParseRefError> {
    if s.is_empty()
        || !s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(ParseRefError::BadIdentifier(s.to_string()));
    }
    Ok(())
}

impl fmt::Display for GroundRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.name)
        } else {
            write!(f, "{}({})", self.name, self.args.join(","))
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseRefError {
    #[error("empty reference")]
    Empty,
    #[error("unbalanced parentheses in `{0}`")]
    Unbalanced(String),
    #[error("bad identifier `{0}`")]
    BadIdentifier(String),
}

/// Lower-snake-case normalization for advisor-proposed names.
pub fn normalize_name(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut last_us = true;
    for c in raw.trim().chars() {
        let c = if c.is_ascii_alphanumeric() {
            c.to_ascii_lowercase()
        } else {
            '_'
        };
        if c == '_' {
            if !last_us {
                out.push('_');
            }
            last_us = true;
        } else {
            out.push(c);
            last_us = false;
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trips() {
        let r = GroundRef::parse("inserted(peg,hole1)").unwrap();
        assert_eq!(r.name, "inserted");
        assert_eq!(r.args, vec!["peg", "hole1"]);
        assert_eq!(GroundRef::parse(&r.to_string()).unwrap(), r);

        let bare = GroundRef::parse("gripper_empty").unwrap();
        assert!(bare.args.is_empty());
        assert_eq!(bare.to_string(), "gripper_empty");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(GroundRef::parse("").is_err());
        assert!(GroundRef::parse("foo(bar").is_err());
        assert!(GroundRef::parse("foo(a b)").is_err());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_name("Hole Free"), "hole_free");
        assert_eq!(normalize_name("hole-free "), "hole_free");
        assert_eq!(normalize_name("hole__free"), "hole_free");
    }
}
