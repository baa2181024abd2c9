//! Bottom-up risk propagation, audit, scenario extraction and what-if
//! mitigation.
//!
//! Leaves evaluate to their recorded triple. An OR node takes the effort and
//! risk of its most attractive feasible child (the attack an attacker would
//! pick). An AND node needs every child to succeed, so effort and risk are
//! the component-wise maxima over its feasible children: the attacker pays
//! the bottleneck on both axes. Gain never propagates upward on its own: a
//! node's gain is its recorded gain when present, otherwise that of the
//! child the value came from. Assumption nodes are environmental
//! preconditions and contribute nothing.
//!
//! Mitigation is a hypothesis, not an edit: a mitigated node becomes
//! infeasible along with everything that needs it, and the rest of the
//! forest re-propagates unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{AttackNode, Combinator, Locus, NodeId, RiskTriple};
use crate::resolve::ResolvedForest;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("unknown tree {0:?}")]
    UnknownTree(String),
    #[error("unknown nodes: {}", format_ids(.0))]
    UnknownNodes(Vec<NodeId>),
    #[error("leaf {0} has no recorded value; validate the forest first")]
    UnannotatedLeaf(NodeId),
    #[error("goal of tree {0:?} is infeasible under the current mitigations")]
    InfeasibleGoal(String),
}

fn format_ids(ids: &[NodeId]) -> String {
    ids.iter()
        .map(|id| id.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// A set of nodes hypothetically declared infeasible.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct MitigationSet {
    nodes: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("mitigation file line {line}: {message}")]
pub struct MitigationParseError {
    pub line: usize,
    pub message: String,
}

impl MitigationSet {
    pub fn new(nodes: impl IntoIterator<Item = NodeId>) -> Self {
        Self {
            nodes: nodes.into_iter().collect(),
        }
    }

    /// Parse the text format: one `tree:outline` per line (a bare tree id
    /// names the root goal), `#` comments and blank lines ignored.
    pub fn parse(text: &str) -> Result<Self, MitigationParseError> {
        let mut nodes = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let id = line.parse::<NodeId>().map_err(|e| MitigationParseError {
                line: idx + 1,
                message: e.to_string(),
            })?;
            nodes.insert(id);
        }
        Ok(Self { nodes })
    }

    pub fn insert(&mut self, id: NodeId) {
        self.nodes.insert(id);
    }

    pub fn union(&self, other: &MitigationSet) -> MitigationSet {
        MitigationSet {
            nodes: self.nodes.union(&other.nodes).cloned().collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.iter()
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl FromIterator<NodeId> for MitigationSet {
    fn from_iter<T: IntoIterator<Item = NodeId>>(iter: T) -> Self {
        Self::new(iter)
    }
}

/// Outcome of propagation for one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum NodeValue {
    /// The node is achievable; `value` is its computed triple. `selected` is
    /// the child an OR node's value came from.
    Feasible {
        value: RiskTriple,
        #[serde(skip_serializing_if = "Option::is_none")]
        selected: Option<NodeId>,
    },
    /// Mitigated, or structurally unachievable under the mitigations.
    Infeasible,
    /// An assumption node; carries no value and blocks nothing.
    Excluded,
}

impl NodeValue {
    pub fn triple(&self) -> Option<RiskTriple> {
        match self {
            NodeValue::Feasible { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, NodeValue::Feasible { .. })
    }
}

/// Computed values for every node of a resolved forest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Evaluation {
    values: BTreeMap<NodeId, NodeValue>,
}

impl Evaluation {
    pub fn value(&self, id: &NodeId) -> Option<&NodeValue> {
        self.values.get(id)
    }

    pub fn triple(&self, id: &NodeId) -> Option<RiskTriple> {
        self.values.get(id).and_then(NodeValue::triple)
    }

    pub fn root_value(&self, tree: &str) -> Option<&NodeValue> {
        self.value(&NodeId::root(tree))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &NodeValue)> {
        self.values.iter()
    }
}

/// Propagate effort and risk bottom-up through every tree of the forest.
pub fn propagate(forest: &ResolvedForest) -> Result<Evaluation, EngineError> {
    let mut memo: BTreeMap<NodeId, NodeValue> = BTreeMap::new();
    for tree in forest.forest().trees() {
        let mut nodes = Vec::new();
        tree.root.walk(&mut |node| nodes.push(node));
        for node in nodes {
            eval_node(forest, node, &mut memo)?;
        }
    }
    Ok(Evaluation { values: memo })
}

fn eval_node(
    forest: &ResolvedForest,
    node: &AttackNode,
    memo: &mut BTreeMap<NodeId, NodeValue>,
) -> Result<NodeValue, EngineError> {
    if let Some(value) = memo.get(&node.id) {
        return Ok(value.clone());
    }

    let value = compute(forest, node, memo)?;
    memo.insert(node.id.clone(), value.clone());
    Ok(value)
}

fn compute(
    forest: &ResolvedForest,
    node: &AttackNode,
    memo: &mut BTreeMap<NodeId, NodeValue>,
) -> Result<NodeValue, EngineError> {
    // An explicit mitigation kills the node whatever else it is.
    if forest.is_mitigated(&node.id) {
        return Ok(NodeValue::Infeasible);
    }
    if node.is_assumption() {
        return Ok(NodeValue::Excluded);
    }

    if let Some(target_id) = &node.reference {
        let target = forest
            .node(target_id)
            .expect("resolved forest guarantees reference targets");
        let target_value = eval_node(forest, target, memo)?;
        return Ok(match target_value {
            NodeValue::Feasible { value, .. } => NodeValue::Feasible {
                value: RiskTriple {
                    effort: value.effort,
                    risk: value.risk,
                    // Gain is intrinsic: a local recording wins over the target's.
                    gain: node.recorded.map_or(value.gain, |r| r.gain),
                },
                selected: None,
            },
            other => other,
        });
    }

    if node.children.is_empty() {
        let recorded = node
            .recorded
            .ok_or_else(|| EngineError::UnannotatedLeaf(node.id.clone()))?;
        return Ok(NodeValue::Feasible {
            value: recorded,
            selected: None,
        });
    }

    let mut feasible: Vec<(&AttackNode, RiskTriple)> = Vec::new();
    let mut any_infeasible = false;
    for child in &node.children {
        match eval_node(forest, child, memo)? {
            NodeValue::Feasible { value, .. } => feasible.push((child, value)),
            NodeValue::Infeasible => any_infeasible = true,
            NodeValue::Excluded => {}
        }
    }

    match node.combinator {
        Combinator::And | Combinator::Leaf => {
            // Leaf combinator with children is a validation error; evaluate
            // it like an AND so propagation still terminates.
            if any_infeasible || feasible.is_empty() {
                return Ok(NodeValue::Infeasible);
            }
            let effort = feasible.iter().map(|(_, v)| v.effort).max().unwrap();
            let risk = feasible.iter().map(|(_, v)| v.risk).max().unwrap();
            let gain = match node.recorded {
                Some(recorded) => recorded.gain,
                // Ties go to the lowest outline number; children are in
                // outline order and `>` keeps the first maximum.
                None => {
                    let mut best = &feasible[0];
                    for candidate in &feasible[1..] {
                        if candidate.1.effort > best.1.effort {
                            best = candidate;
                        }
                    }
                    best.1.gain
                }
            };
            Ok(NodeValue::Feasible {
                value: RiskTriple { effort, risk, gain },
                selected: None,
            })
        }
        Combinator::Or => {
            if feasible.is_empty() {
                return Ok(NodeValue::Infeasible);
            }
            // The attacker picks the most attractive option; ties go to the
            // lowest outline number (`<` keeps the first minimum).
            let mut best = &feasible[0];
            for candidate in &feasible[1..] {
                if candidate.1.attractiveness() < best.1.attractiveness() {
                    best = candidate;
                }
            }
            let (child, value) = best;
            Ok(NodeValue::Feasible {
                value: RiskTriple {
                    effort: value.effort,
                    risk: value.risk,
                    gain: node.recorded.map_or(value.gain, |r| r.gain),
                },
                selected: Some(child.id.clone()),
            })
        }
    }
}

/// A recorded value that mechanical propagation disagrees with.
///
/// Gain is never audited: it is intrinsic to the node, not derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditFinding {
    pub node: NodeId,
    pub title: String,
    pub recorded: RiskTriple,
    pub computed_effort: u8,
    pub computed_risk: u8,
}

impl AuditFinding {
    /// Recorded minus computed; positive means the analyst wrote a higher score.
    pub fn effort_delta(&self) -> i16 {
        i16::from(self.recorded.effort) - i16::from(self.computed_effort)
    }

    pub fn risk_delta(&self) -> i16 {
        i16::from(self.recorded.risk) - i16::from(self.computed_risk)
    }
}

impl fmt::Display for AuditFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: recorded {} but computed {}/{}",
            self.node, self.recorded, self.computed_effort, self.computed_risk
        )
    }
}

/// Compare recorded against computed effort/risk on every node whose value
/// is derived (inner nodes and references).
///
/// Nodes tagged `unverified` are skipped: their recorded values are already
/// marked as untrusted. Findings come back sorted by tree id then outline.
pub fn audit(forest: &ResolvedForest) -> Result<Vec<AuditFinding>, EngineError> {
    let evaluation = propagate(forest)?;
    let mut findings = Vec::new();
    for tree in forest.forest().trees() {
        tree.root.walk(&mut |node| {
            let derived = !node.children.is_empty() || node.reference.is_some();
            if !derived || node.is_unverified() {
                return;
            }
            let (recorded, value) = match (node.recorded, evaluation.triple(&node.id)) {
                (Some(recorded), Some(value)) => (recorded, value),
                _ => return,
            };
            if recorded.effort != value.effort || recorded.risk != value.risk {
                findings.push(AuditFinding {
                    node: node.id.clone(),
                    title: node.title.clone(),
                    recorded,
                    computed_effort: value.effort,
                    computed_risk: value.risk,
                });
            }
        });
    }
    findings.sort_by(|a, b| a.node.cmp(&b.node));
    Ok(findings)
}

/// One concrete attack achieving a tree's goal: a choice at every OR node,
/// everything at every AND node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Scenario {
    pub root: NodeId,
    /// Root's computed effort and risk with the root's gain.
    pub summary: RiskTriple,
    /// Concrete attack leaves taking part, across references.
    pub leaves: BTreeSet<NodeId>,
    /// Chosen child per OR node included in the scenario.
    pub or_choices: BTreeMap<NodeId, NodeId>,
    /// OR-descent from the root: follows the selected child at OR nodes and
    /// reference targets, stopping at a leaf or at an AND node (whose
    /// children are all part of the scenario).
    pub path: Vec<NodeId>,
}

impl Scenario {
    /// Terminal of the OR-descent, the "dominant leaf" a report names.
    pub fn dominant_leaf(&self) -> &NodeId {
        self.path.last().expect("path always contains the root")
    }

    pub fn path_contains(&self, id: &NodeId) -> bool {
        self.path.iter().any(|p| p == id)
    }
}

/// Extract the attack scenario bottom-up propagation selects for a tree.
pub fn dominant_scenario(forest: &ResolvedForest, tree: &str) -> Result<Scenario, EngineError> {
    let attack_tree = forest
        .tree(tree)
        .ok_or_else(|| EngineError::UnknownTree(tree.to_string()))?;
    let evaluation = propagate(forest)?;

    let root_value = evaluation
        .root_value(tree)
        .expect("propagation covers all nodes");
    let summary = match root_value {
        NodeValue::Feasible { value, .. } => *value,
        _ => return Err(EngineError::InfeasibleGoal(tree.to_string())),
    };

    let mut leaves = BTreeSet::new();
    let mut or_choices = BTreeMap::new();
    collect(forest, &evaluation, &attack_tree.root, &mut leaves, &mut or_choices);

    let mut path = vec![attack_tree.root.id.clone()];
    let mut current = &attack_tree.root;
    loop {
        if let Some(target_id) = &current.reference {
            path.push(target_id.clone());
            current = forest.node(target_id).expect("resolved reference");
            continue;
        }
        if current.combinator == Combinator::Or {
            let selected = match evaluation.value(&current.id) {
                Some(NodeValue::Feasible {
                    selected: Some(id), ..
                }) => id.clone(),
                _ => break,
            };
            path.push(selected.clone());
            current = forest.node(&selected).expect("selected child exists");
            continue;
        }
        break;
    }

    Ok(Scenario {
        root: attack_tree.root_id(),
        summary,
        leaves,
        or_choices,
        path,
    })
}

fn collect(
    forest: &ResolvedForest,
    evaluation: &Evaluation,
    node: &AttackNode,
    leaves: &mut BTreeSet<NodeId>,
    or_choices: &mut BTreeMap<NodeId, NodeId>,
) {
    let selected = match evaluation.value(&node.id) {
        Some(NodeValue::Feasible { selected, .. }) => selected.clone(),
        _ => return,
    };
    if let Some(target_id) = &node.reference {
        let target = forest.node(target_id).expect("resolved reference");
        collect(forest, evaluation, target, leaves, or_choices);
        return;
    }
    if node.children.is_empty() {
        leaves.insert(node.id.clone());
        return;
    }
    match node.combinator {
        Combinator::Or => {
            if let Some(choice) = selected {
                or_choices.insert(node.id.clone(), choice.clone());
                let child = forest.node(&choice).expect("selected child exists");
                collect(forest, evaluation, child, leaves, or_choices);
            }
        }
        Combinator::And | Combinator::Leaf => {
            for child in &node.children {
                collect(forest, evaluation, child, leaves, or_choices);
            }
        }
    }
}

/// Declare the given nodes infeasible. Infeasibility propagates: an AND node
/// dies with any of its children, an OR node only once all options are gone,
/// and references die with their targets.
pub fn apply_mitigations(
    forest: &ResolvedForest,
    mitigations: &MitigationSet,
) -> Result<ResolvedForest, EngineError> {
    let unknown: Vec<NodeId> = mitigations
        .iter()
        .filter(|id| forest.node(id).is_none())
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(EngineError::UnknownNodes(unknown));
    }
    Ok(forest.with_added_mitigations(mitigations.iter().cloned().collect()))
}

/// Before/after picture of a hypothetical mitigation on one tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WhatIfReport {
    pub tree: String,
    pub mitigations: Vec<NodeId>,
    pub before: Scenario,
    /// `None` when the goal becomes infeasible.
    pub after: Option<Scenario>,
    /// Locus tag of the after-dominant leaf, when it carries one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub after_locus: Option<Locus>,
}

/// Evaluate a mitigation hypothesis: dominant scenario before and after.
pub fn what_if(
    forest: &ResolvedForest,
    tree: &str,
    mitigations: &MitigationSet,
) -> Result<WhatIfReport, EngineError> {
    let before = dominant_scenario(forest, tree)?;
    let mitigated = apply_mitigations(forest, mitigations)?;
    let after = match dominant_scenario(&mitigated, tree) {
        Ok(scenario) => Some(scenario),
        Err(EngineError::InfeasibleGoal(_)) => None,
        Err(other) => return Err(other),
    };
    let after_locus = after
        .as_ref()
        .and_then(|s| forest.node(s.dominant_leaf()))
        .and_then(AttackNode::locus);
    Ok(WhatIfReport {
        tree: tree.to_string(),
        mitigations: mitigations.iter().cloned().collect(),
        before,
        after,
        after_locus,
    })
}
