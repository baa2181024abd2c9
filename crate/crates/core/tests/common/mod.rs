//! Shared test support: fixture loading, random forest generation, and the
//! independent oracles the engine is checked against.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::PathBuf;

use proptest::prelude::*;

use risktree_core::model::{
    AttackNode, AttackTree, Combinator, Forest, Locus, NodeId, Outline, ProtectionProperty,
    RiskTriple, Tag,
};
use risktree_core::outline::parse_outline;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn fixture_text(name: &str) -> String {
    let path = fixture_path(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

pub fn fixture_forest(name: &str) -> Forest {
    parse_outline(&fixture_text(name), name)
        .unwrap_or_else(|e| panic!("parsing fixture {name}: {e}"))
        .forest
}

pub fn node_id(text: &str) -> NodeId {
    text.parse().unwrap()
}

// ---------------------------------------------------------------------------
// Random forest generation
// ---------------------------------------------------------------------------

/// Tree shape for generated forests. Assumption leaves only ever sit under
/// AND nodes, like in real documents.
#[derive(Debug, Clone)]
pub enum PlainNode {
    Leaf(RiskTriple),
    Assumption,
    Inner { and: bool, children: Vec<PlainNode> },
}

pub fn arb_triple() -> impl Strategy<Value = RiskTriple> {
    (1u8..=9, 1u8..=9, 1u8..=9).prop_map(|(e, r, g)| RiskTriple::new(e, r, g).unwrap())
}

fn arb_shape(depth: u32) -> impl Strategy<Value = PlainNode> {
    let leaf = arb_triple().prop_map(PlainNode::Leaf);
    leaf.prop_recursive(depth, 16, 4, |inner| {
        (
            any::<bool>(),
            prop::collection::vec(inner, 1..4),
            // Chance of an extra assumption child.
            prop::bool::weighted(0.2),
        )
            .prop_map(|(and, mut children, with_assumption)| {
                if with_assumption && and {
                    children.insert(0, PlainNode::Assumption);
                }
                PlainNode::Inner { and, children }
            })
    })
}

/// Trim a generated shape to at most `budget` concrete leaves and repair the
/// structural rules (assumptions only under AND, AND groups keep at least
/// two real children or degrade to OR, every inner node keeps at least one
/// real child).
fn prune(node: PlainNode, budget: &mut u32, under_and: bool) -> Option<PlainNode> {
    match node {
        PlainNode::Leaf(triple) => {
            if *budget == 0 {
                None
            } else {
                *budget -= 1;
                Some(PlainNode::Leaf(triple))
            }
        }
        PlainNode::Assumption => under_and.then_some(PlainNode::Assumption),
        PlainNode::Inner { and, children } => {
            let mut kept = Vec::new();
            for child in children {
                if let Some(pruned) = prune(child, budget, and) {
                    kept.push(pruned);
                }
            }
            let real = kept
                .iter()
                .filter(|c| !matches!(c, PlainNode::Assumption))
                .count();
            if real == 0 {
                return None;
            }
            let and = and && real >= 2;
            if !and {
                kept.retain(|c| !matches!(c, PlainNode::Assumption));
            }
            Some(PlainNode::Inner { and, children: kept })
        }
    }
}

/// A random single-tree forest with at most `max_leaves` concrete leaves.
pub fn arb_plain_forest(depth: u32, max_leaves: u32) -> impl Strategy<Value = Forest> {
    (arb_shape(depth), arb_triple()).prop_map(move |(shape, fallback)| {
        let mut budget = max_leaves;
        let shape = prune(shape, &mut budget, false).unwrap_or(PlainNode::Leaf(fallback));
        let root = build_node(&shape, "T", Outline::root(), &mut 0);
        Forest::from_trees([AttackTree {
            id: "T".into(),
            title: "generated goal".into(),
            asset: "asset".into(),
            property: ProtectionProperty::Integrity,
            root,
        }])
        .unwrap()
    })
}

fn build_node(shape: &PlainNode, tree: &str, outline: Outline, counter: &mut u32) -> AttackNode {
    *counter += 1;
    let id = NodeId::new(tree, outline.clone());
    let title = format!("step {counter}");
    match shape {
        PlainNode::Leaf(triple) => AttackNode {
            id,
            title,
            combinator: Combinator::Leaf,
            recorded: Some(*triple),
            reference: None,
            tags: BTreeSet::new(),
            children: Vec::new(),
        },
        PlainNode::Assumption => AttackNode {
            id,
            title,
            combinator: Combinator::Leaf,
            recorded: None,
            reference: None,
            tags: [Tag::Assumption].into_iter().collect(),
            children: Vec::new(),
        },
        PlainNode::Inner { and, children } => {
            let kids: Vec<AttackNode> = children
                .iter()
                .enumerate()
                .map(|(i, c)| build_node(c, tree, outline.child(i as u32 + 1), counter))
                .collect();
            AttackNode {
                id,
                title,
                combinator: if *and { Combinator::And } else { Combinator::Or },
                recorded: None,
                reference: None,
                tags: BTreeSet::new(),
                children: kids,
            }
        }
    }
}

/// All node ids of a forest, for picking mitigation subsets.
pub fn all_node_ids(forest: &Forest) -> Vec<NodeId> {
    forest.node_ids()
}

/// Deterministic coin flip keyed on (seed, index).
pub fn seeded_pick(seed: u64, index: usize, one_in: u64) -> bool {
    let mut hasher = DefaultHasher::new();
    (seed, index).hash(&mut hasher);
    hasher.finish().is_multiple_of(one_in)
}

// ---------------------------------------------------------------------------
// Richly decorated forests for round-trip testing
// ---------------------------------------------------------------------------

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

const WORDS: &[&str] = &[
    "intercept",
    "credentials",
    "exploit",
    "buffer overflow",
    "connection",
    "bypass (error checking)",
    "firewall",
    "relay & modify",
    "server-side check",
    "audit log",
    "100 requests/second",
    "phishing, DNS attacks etc.",
];

fn gen_title(state: &mut u64) -> String {
    let count = 1 + (splitmix(state) % 3) as usize;
    let parts: Vec<&str> = (0..count)
        .map(|_| WORDS[(splitmix(state) % WORDS.len() as u64) as usize])
        .collect();
    parts.join(" ")
}

fn gen_tags(state: &mut u64) -> BTreeSet<Tag> {
    let mut tags = BTreeSet::new();
    if splitmix(state).is_multiple_of(5) {
        tags.insert(Tag::Unverified);
    }
    if splitmix(state).is_multiple_of(5) {
        let locus = match splitmix(state) % 3 {
            0 => Locus::System,
            1 => Locus::User,
            _ => Locus::Environment,
        };
        tags.insert(Tag::Locus(locus));
    }
    if splitmix(state).is_multiple_of(7) {
        tags.insert(Tag::Custom("reviewed".into()));
    }
    tags
}

const REF_POOL: &[&str] = &["Q:1", "R.2:3.1", "T1", "T2:2.1"];

/// Decorate a plain shape with titles, tags, cross-references and recorded
/// values on inner nodes. References may dangle; round-trips do not resolve.
fn decorate(shape: &PlainNode, tree: &str, outline: Outline, state: &mut u64) -> AttackNode {
    let id = NodeId::new(tree, outline.clone());
    match shape {
        PlainNode::Leaf(triple) => {
            let reference = if splitmix(state).is_multiple_of(4) {
                Some(
                    REF_POOL[(splitmix(state) % REF_POOL.len() as u64) as usize]
                        .parse()
                        .unwrap(),
                )
            } else {
                None
            };
            AttackNode {
                id,
                title: gen_title(state),
                combinator: Combinator::Leaf,
                recorded: Some(*triple),
                reference,
                tags: gen_tags(state),
                children: Vec::new(),
            }
        }
        PlainNode::Assumption => AttackNode {
            id,
            title: gen_title(state),
            combinator: Combinator::Leaf,
            recorded: None,
            reference: None,
            tags: [Tag::Assumption].into_iter().collect(),
            children: Vec::new(),
        },
        PlainNode::Inner { and, children } => {
            let kids: Vec<AttackNode> = children
                .iter()
                .enumerate()
                .map(|(i, c)| decorate(c, tree, outline.child(i as u32 + 1), state))
                .collect();
            let recorded = if splitmix(state).is_multiple_of(2) {
                let e = (splitmix(state) % 9 + 1) as u8;
                let r = (splitmix(state) % 9 + 1) as u8;
                let g = (splitmix(state) % 9 + 1) as u8;
                Some(RiskTriple::new(e, r, g).unwrap())
            } else {
                None
            };
            AttackNode {
                id,
                title: gen_title(state),
                combinator: if *and { Combinator::And } else { Combinator::Or },
                recorded,
                reference: None,
                tags: gen_tags(state),
                children: kids,
            }
        }
    }
}

/// A forest of one to three decorated trees, for round-trip properties.
pub fn arb_rich_forest() -> impl Strategy<Value = Forest> {
    (
        prop::collection::vec((arb_shape(5), arb_triple()), 1..=3),
        any::<u64>(),
    )
        .prop_map(|(shapes, seed)| {
            let mut state = seed;
            let properties = [
                ProtectionProperty::Integrity,
                ProtectionProperty::Confidentiality,
                ProtectionProperty::Availability,
            ];
            let trees = shapes.into_iter().enumerate().map(|(i, (shape, fallback))| {
                let mut budget = 16;
                let shape =
                    prune(shape, &mut budget, false).unwrap_or(PlainNode::Leaf(fallback));
                let tree_id = format!("T{}", i + 1);
                let root = decorate(&shape, &tree_id, Outline::root(), &mut state);
                AttackTree {
                    id: tree_id.clone(),
                    title: gen_title(&mut state),
                    asset: format!("asset-{}", i + 1),
                    property: properties[i % 3],
                    root,
                }
            });
            Forest::from_trees(trees).unwrap()
        })
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

/// Exhaustively enumerate attack scenarios as lists of leaf efforts: one
/// child per OR node, all children per AND node, assumptions skipped.
pub fn enumerate_scenarios(node: &AttackNode) -> Vec<Vec<u8>> {
    if node.is_assumption() {
        return vec![Vec::new()];
    }
    if node.children.is_empty() {
        return vec![vec![node.recorded.expect("generated leaves carry values").effort]];
    }
    match node.combinator {
        Combinator::Or => node
            .children
            .iter()
            .filter(|c| !c.is_assumption())
            .flat_map(enumerate_scenarios)
            .collect(),
        Combinator::And | Combinator::Leaf => {
            let mut acc: Vec<Vec<u8>> = vec![Vec::new()];
            for child in &node.children {
                if child.is_assumption() {
                    continue;
                }
                let options = enumerate_scenarios(child);
                let mut next = Vec::with_capacity(acc.len() * options.len());
                for base in &acc {
                    for option in &options {
                        let mut merged = base.clone();
                        merged.extend(option);
                        next.push(merged);
                    }
                }
                acc = next;
            }
            acc
        }
    }
}

/// Brute-force root effort: cheapest scenario, where a scenario costs its
/// most expensive leaf.
pub fn brute_force_root_effort(root: &AttackNode) -> u8 {
    enumerate_scenarios(root)
        .into_iter()
        .filter_map(|leaves| leaves.into_iter().max())
        .min()
        .expect("generated trees always have a concrete scenario")
}

/// Replay the documented local selection rule with a plain recursion that
/// shares nothing with the engine. `None` means the node is excluded.
pub fn local_rule_value(node: &AttackNode) -> Option<RiskTriple> {
    if node.is_assumption() {
        return None;
    }
    if node.children.is_empty() {
        return Some(node.recorded.expect("generated leaves carry values"));
    }
    let values: Vec<RiskTriple> = node.children.iter().filter_map(local_rule_value).collect();
    assert!(!values.is_empty(), "generated inner nodes keep a real child");
    match node.combinator {
        Combinator::Or => {
            let mut best = values[0];
            for value in &values[1..] {
                if value.attractiveness() < best.attractiveness() {
                    best = *value;
                }
            }
            Some(RiskTriple {
                effort: best.effort,
                risk: best.risk,
                gain: node.recorded.map_or(best.gain, |r| r.gain),
            })
        }
        Combinator::And | Combinator::Leaf => {
            let effort = values.iter().map(|v| v.effort).max().unwrap();
            let risk = values.iter().map(|v| v.risk).max().unwrap();
            let mut gain_source = values[0];
            for value in &values[1..] {
                if value.effort > gain_source.effort {
                    gain_source = *value;
                }
            }
            Some(RiskTriple {
                effort,
                risk,
                gain: node.recorded.map_or(gain_source.gain, |r| r.gain),
            })
        }
    }
}
