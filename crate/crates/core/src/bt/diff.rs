//! Structural diff between two trees plus DOT rendering with the
//! changed connections highlighted in red.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{BTNode, NodeKind};

/// Node and edge deltas keyed by node id. Total over arbitrary trees.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub inserted_nodes: BTreeSet<String>,
    pub removed_nodes: BTreeSet<String>,
    /// Present in both trees but under a different parent.
    pub moved_nodes: BTreeSet<String>,
    pub inserted_edges: BTreeSet<(String, String)>,
    pub removed_edges: BTreeSet<(String, String)>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.inserted_nodes.is_empty()
            && self.removed_nodes.is_empty()
            && self.moved_nodes.is_empty()
            && self.inserted_edges.is_empty()
            && self.removed_edges.is_empty()
    }

    /// Roots of inserted subtrees: inserted nodes whose parent in `new`
    /// already existed before the change (or that are the new root).
    pub fn inserted_subtree_roots<'a>(&self, new: &'a BTNode) -> Vec<&'a BTNode> {
        let parents = parent_map(new);
        let mut roots = Vec::new();
        new.walk(&mut |n| {
            if self.inserted_nodes.contains(&n.id) {
                let parent_inserted = parents
                    .get(n.id.as_str())
                    .map(|p| self.inserted_nodes.contains(*p))
                    .unwrap_or(false);
                if !parent_inserted {
                    roots.push(n);
                }
            }
        });
        roots
    }
}

fn parent_map(tree: &BTNode) -> BTreeMap<&str, &str> {
    let mut map = BTreeMap::new();
    let mut stack = vec![tree];
    while let Some(node) = stack.pop() {
        for child in node.children() {
            map.insert(child.id.as_str(), node.id.as_str());
            stack.push(child);
        }
    }
    map
}

fn edge_set(tree: &BTNode) -> BTreeSet<(String, String)> {
    parent_map(tree)
        .into_iter()
        .map(|(child, parent)| (parent.to_string(), child.to_string()))
        .collect()
}

fn node_ids(tree: &BTNode) -> BTreeSet<String> {
    let mut ids = BTreeSet::new();
    tree.walk(&mut |n| {
        ids.insert(n.id.clone());
    });
    ids
}

pub fn diff(old: &BTNode, new: &BTNode) -> ChangeSet {
    let old_ids = node_ids(old);
    let new_ids = node_ids(new);
    let old_parents = parent_map(old);
    let new_parents = parent_map(new);

    let inserted_nodes: BTreeSet<_> = new_ids.difference(&old_ids).cloned().collect();
    let removed_nodes: BTreeSet<_> = old_ids.difference(&new_ids).cloned().collect();
    let moved_nodes = old_ids
        .intersection(&new_ids)
        .filter(|id| old_parents.get(id.as_str()) != new_parents.get(id.as_str()))
        .cloned()
        .collect();

    let old_edges = edge_set(old);
    let new_edges = edge_set(new);
    ChangeSet {
        inserted_nodes,
        removed_nodes,
        moved_nodes,
        inserted_edges: new_edges.difference(&old_edges).cloned().collect(),
        removed_edges: old_edges.difference(&new_edges).cloned().collect(),
    }
}

fn dot_escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

fn node_label(node: &BTNode) -> String {
    match &node.kind {
        NodeKind::Sequence(_) => "\u{2192}".to_string(),
        NodeKind::Fallback(_) => "?".to_string(),
        NodeKind::Condition(c) => format!("{c}?"),
        NodeKind::Skill(s) => format!("{s}!"),
    }
}

/// Renders a DOT digraph of `tree`; edges and nodes in `highlight` are red.
pub fn to_dot(tree: &BTNode, highlight: &ChangeSet) -> String {
    let mut out = String::from("digraph bt {\n  node [fontname=\"Helvetica\"];\n");
    tree.walk(&mut |n| {
        let shape = if n.is_leaf() { "ellipse" } else { "box" };
        let mut attrs = format!(
            "label=\"{}\", shape={shape}",
            dot_escape(&node_label(n))
        );
        if highlight.inserted_nodes.contains(&n.id) {
            attrs.push_str(", color=red, fontcolor=red");
        }
        out.push_str(&format!("  \"{}\" [{attrs}];\n", dot_escape(&n.id)));
    });
    tree.walk(&mut |n| {
        for child in n.children() {
            let mut attrs = String::new();
            if highlight
                .inserted_edges
                .contains(&(n.id.clone(), child.id.clone()))
            {
                attrs = " [color=red, penwidth=2.0]".to_string();
            }
            out.push_str(&format!(
                "  \"{}\" -> \"{}\"{attrs};\n",
                dot_escape(&n.id),
                dot_escape(&child.id)
            ));
        }
    });
    out.push_str("}\n");
    out
}
