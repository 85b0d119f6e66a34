//! Randomized behavior tree properties: control-node identities,
//! determinism, and document round-tripping.

use std::collections::BTreeMap;

use proptest::prelude::*;

use bt_recover::bt::{from_document, tick, to_document, BTNode, NodeStatus, SkillExecutor, TickError};
use bt_recover::types::GroundRef;
use bt_recover::world::WorldState;

/// Table-driven executor: every leaf name maps to a fixed status.
#[derive(Debug, Default, Clone)]
struct TableExecutor {
    conditions: BTreeMap<String, bool>,
    skills: BTreeMap<String, NodeStatus>,
}

impl SkillExecutor for TableExecutor {
    fn eval_condition(&mut self, cond: &GroundRef, _world: &WorldState) -> Result<bool, TickError> {
        Ok(*self.conditions.get(&cond.name).unwrap_or(&false))
    }

    fn execute_skill(
        &mut self,
        skill: &GroundRef,
        _world: &mut WorldState,
    ) -> Result<NodeStatus, TickError> {
        Ok(*self.skills.get(&skill.name).unwrap_or(&NodeStatus::Failure))
    }
}

const CONDITION_NAMES: &[&str] = &["c0", "c1", "c2", "c3", "c4"];
const SKILL_NAMES: &[&str] = &["s0", "s1", "s2", "s3", "s4"];

fn arb_leaf(counter: std::rc::Rc<std::cell::Cell<u64>>) -> impl Strategy<Value = BTNode> {
    let c2 = counter.clone();
    prop_oneof![
        (0..CONDITION_NAMES.len()).prop_map(move |i| {
            let id = counter.get();
            counter.set(id + 1);
            BTNode::condition(format!("n{id}"), GroundRef::new(CONDITION_NAMES[i], &[]))
        }),
        (0..SKILL_NAMES.len()).prop_map(move |i| {
            let id = c2.get();
            c2.set(id + 1);
            BTNode::skill(format!("n{id}"), GroundRef::new(SKILL_NAMES[i], &[]))
        }),
    ]
}

fn arb_tree() -> impl Strategy<Value = BTNode> {
    let counter = std::rc::Rc::new(std::cell::Cell::new(0u64));
    let c2 = counter.clone();
    arb_leaf(counter.clone()).prop_recursive(4, 24, 3, move |inner| {
        let counter = c2.clone();
        let c3 = c2.clone();
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(move |children| {
                let id = counter.get();
                counter.set(id + 1);
                BTNode::sequence(format!("q{id}"), children)
            }),
            prop::collection::vec(inner, 1..4).prop_map(move |children| {
                let id = c3.get();
                c3.set(id + 1);
                BTNode::fallback(format!("f{id}"), children)
            }),
        ]
    })
}

fn arb_tables() -> impl Strategy<Value = TableExecutor> {
    (
        prop::collection::vec(any::<bool>(), CONDITION_NAMES.len()),
        prop::collection::vec(0u8..3, SKILL_NAMES.len()),
    )
        .prop_map(|(conds, skills)| {
            let mut exec = TableExecutor::default();
            for (name, value) in CONDITION_NAMES.iter().zip(conds) {
                exec.conditions.insert(name.to_string(), value);
            }
            for (name, value) in SKILL_NAMES.iter().zip(skills) {
                let status = match value {
                    0 => NodeStatus::Success,
                    1 => NodeStatus::Failure,
                    _ => NodeStatus::Running,
                };
                exec.skills.insert(name.to_string(), status);
            }
            exec
        })
}

fn run(tree: &BTNode, exec: &TableExecutor) -> NodeStatus {
    let mut world = WorldState::new();
    let (status, _) = tick(tree, &mut world, &mut exec.clone(), 0).unwrap();
    status
}

/// Renames node ids with a prefix so wrapped trees stay id-unique.
fn reid(node: &BTNode, prefix: &str) -> BTNode {
    let mut clone = node.clone();
    let mut i = 0u64;
    fn walk_mut(n: &mut BTNode, prefix: &str, i: &mut u64) {
        n.id = format!("{prefix}{}", *i);
        *i += 1;
        match &mut n.kind {
            bt_recover::bt::NodeKind::Sequence(cs) | bt_recover::bt::NodeKind::Fallback(cs) => {
                for c in cs {
                    walk_mut(c, prefix, i);
                }
            }
            _ => {}
        }
    }
    walk_mut(&mut clone, prefix, &mut i);
    clone
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn singleton_sequence_is_identity(tree in arb_tree(), exec in arb_tables()) {
        let wrapped = BTNode::sequence("wrap", vec![reid(&tree, "w")]);
        prop_assert_eq!(run(&tree, &exec), run(&wrapped, &exec));
    }

    #[test]
    fn singleton_fallback_is_identity(tree in arb_tree(), exec in arb_tables()) {
        let wrapped = BTNode::fallback("wrap", vec![reid(&tree, "w")]);
        prop_assert_eq!(run(&tree, &exec), run(&wrapped, &exec));
    }

    #[test]
    fn nested_sequences_flatten(
        a in arb_tree(), b in arb_tree(), c in arb_tree(), exec in arb_tables()
    ) {
        let nested = BTNode::sequence(
            "outer",
            vec![
                reid(&a, "a"),
                BTNode::sequence("inner", vec![reid(&b, "b"), reid(&c, "c")]),
            ],
        );
        let flat = BTNode::sequence(
            "outer",
            vec![reid(&a, "a"), reid(&b, "b"), reid(&c, "c")],
        );
        prop_assert_eq!(run(&nested, &exec), run(&flat, &exec));
    }

    #[test]
    fn nested_fallbacks_flatten(
        a in arb_tree(), b in arb_tree(), c in arb_tree(), exec in arb_tables()
    ) {
        let nested = BTNode::fallback(
            "outer",
            vec![
                reid(&a, "a"),
                BTNode::fallback("inner", vec![reid(&b, "b"), reid(&c, "c")]),
            ],
        );
        let flat = BTNode::fallback(
            "outer",
            vec![reid(&a, "a"), reid(&b, "b"), reid(&c, "c")],
        );
        prop_assert_eq!(run(&nested, &exec), run(&flat, &exec));
    }

    #[test]
    fn ticking_is_deterministic(tree in arb_tree(), exec in arb_tables()) {
        let mut w1 = WorldState::new();
        let mut w2 = WorldState::new();
        let r1 = tick(&tree, &mut w1, &mut exec.clone(), 0).unwrap();
        let r2 = tick(&tree, &mut w2, &mut exec.clone(), 0).unwrap();
        prop_assert_eq!(r1.0, r2.0);
        prop_assert_eq!(r1.1, r2.1);
    }

    #[test]
    fn documents_round_trip(tree in arb_tree()) {
        let text = to_document(&tree);
        let parsed = from_document(&text).unwrap();
        prop_assert_eq!(&parsed, &tree);
        prop_assert_eq!(to_document(&parsed), text);
    }
}
