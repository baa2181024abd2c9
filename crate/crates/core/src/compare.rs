//! Goal-by-goal comparison of two designs' forests.
//!
//! Trees are matched on their (asset, protection property) pair, both sides
//! are evaluated under the same mitigation hypothesis, and per-component
//! deltas are flagged as significant only beyond a threshold: the scoring is
//! an educated guess, so a one-point difference is noise, not signal.

use serde::Serialize;
use thiserror::Error;

use crate::engine::{
    apply_mitigations, dominant_scenario, propagate, EngineError, MitigationSet, NodeValue,
};
use crate::model::{Forest, GoalKey, Locus, NodeId, RiskTriple};
use crate::resolve::{resolve_refs, ResolveError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("goal {key} claimed by several trees: {}", trees.join(", "))]
    DuplicateGoalKey { key: GoalKey, trees: Vec<String> },
    #[error("{side} forest: {source}")]
    Resolve {
        side: &'static str,
        source: ResolveError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchedGoal {
    pub key: GoalKey,
    pub tree_a: String,
    pub tree_b: String,
}

/// Result of pairing two forests' trees by goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GoalMatching {
    pub matched: Vec<MatchedGoal>,
    pub only_a: Vec<(GoalKey, String)>,
    pub only_b: Vec<(GoalKey, String)>,
}

/// Pair up trees defending the same goal; goals present on one side only are
/// reported, not errors.
pub fn match_goals(a: &Forest, b: &Forest) -> Result<GoalMatching, CompareError> {
    let index_a = goal_index(a)?;
    let index_b = goal_index(b)?;

    let mut matched = Vec::new();
    let mut only_a = Vec::new();
    for (key, tree_a) in &index_a {
        match index_b.get(key) {
            Some(tree_b) => matched.push(MatchedGoal {
                key: key.clone(),
                tree_a: tree_a.clone(),
                tree_b: tree_b.clone(),
            }),
            None => only_a.push((key.clone(), tree_a.clone())),
        }
    }
    let only_b = index_b
        .iter()
        .filter(|(key, _)| !index_a.contains_key(*key))
        .map(|(key, tree)| (key.clone(), tree.clone()))
        .collect();

    Ok(GoalMatching {
        matched,
        only_a,
        only_b,
    })
}

fn goal_index(
    forest: &Forest,
) -> Result<std::collections::BTreeMap<GoalKey, String>, CompareError> {
    let mut index = std::collections::BTreeMap::new();
    for tree in forest.trees() {
        let key = tree.goal_key();
        if let Some(existing) = index.insert(key.clone(), tree.id.clone()) {
            return Err(CompareError::DuplicateGoalKey {
                key,
                trees: vec![existing, tree.id.clone()],
            });
        }
    }
    Ok(index)
}

/// Dominant-leaf information shown per side of a comparison row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DominantLeaf {
    pub id: NodeId,
    pub title: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub locus: Option<Locus>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonRow {
    pub key: GoalKey,
    pub tree_a: String,
    pub tree_b: String,
    /// Computed root triples; `None` when the goal is infeasible on that side.
    pub summary_a: Option<RiskTriple>,
    pub summary_b: Option<RiskTriple>,
    /// Per-component deltas, side b minus side a; present when both sides
    /// are feasible.
    pub effort_delta: Option<i16>,
    pub risk_delta: Option<i16>,
    pub gain_delta: Option<i16>,
    /// True when effort or risk moved beyond the threshold, or feasibility
    /// differs. Gain never drives significance.
    pub significant: bool,
    pub dominant_a: Option<DominantLeaf>,
    pub dominant_b: Option<DominantLeaf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonReport {
    pub threshold: u16,
    pub mitigations: Vec<NodeId>,
    /// One row per matched goal, ordered by (asset, property).
    pub rows: Vec<ComparisonRow>,
    pub only_a: Vec<(GoalKey, String)>,
    pub only_b: Vec<(GoalKey, String)>,
}

impl ComparisonReport {
    pub fn row(&self, asset: &str, property: crate::model::ProtectionProperty) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|row| row.key.asset == asset && row.key.property == property)
    }

    pub fn any_significant(&self) -> bool {
        self.rows.iter().any(|row| row.significant)
    }
}

/// Evaluate both forests under the same mitigation hypothesis and compare
/// them goal by goal.
///
/// Each mitigation id is applied to whichever side contains its tree; ids
/// resolving in neither side are an error.
pub fn compare(
    a: &Forest,
    b: &Forest,
    mitigations: &MitigationSet,
    threshold: u16,
) -> Result<ComparisonReport, CompareError> {
    let matching = match_goals(a, b)?;

    let resolved_a = resolve_refs(a.clone()).map_err(|source| CompareError::Resolve {
        side: "left",
        source,
    })?;
    let resolved_b = resolve_refs(b.clone()).map_err(|source| CompareError::Resolve {
        side: "right",
        source,
    })?;

    let mut for_a = MitigationSet::default();
    let mut for_b = MitigationSet::default();
    let mut unknown = Vec::new();
    for id in mitigations.iter() {
        let mut known = false;
        if a.node(id).is_some() {
            for_a.insert(id.clone());
            known = true;
        }
        if b.node(id).is_some() {
            for_b.insert(id.clone());
            known = true;
        }
        if !known {
            unknown.push(id.clone());
        }
    }
    if !unknown.is_empty() {
        return Err(EngineError::UnknownNodes(unknown).into());
    }

    let mitigated_a = apply_mitigations(&resolved_a, &for_a)?;
    let mitigated_b = apply_mitigations(&resolved_b, &for_b)?;
    let eval_a = propagate(&mitigated_a)?;
    let eval_b = propagate(&mitigated_b)?;

    let mut rows = Vec::new();
    for goal in &matching.matched {
        let summary_a = feasible_triple(eval_a.root_value(&goal.tree_a));
        let summary_b = feasible_triple(eval_b.root_value(&goal.tree_b));

        let (effort_delta, risk_delta, gain_delta) = match (summary_a, summary_b) {
            (Some(va), Some(vb)) => (
                Some(i16::from(vb.effort) - i16::from(va.effort)),
                Some(i16::from(vb.risk) - i16::from(va.risk)),
                Some(i16::from(vb.gain) - i16::from(va.gain)),
            ),
            _ => (None, None, None),
        };
        let significant = match (summary_a, summary_b) {
            (Some(_), Some(_)) => {
                let e = effort_delta.unwrap_or(0).unsigned_abs();
                let r = risk_delta.unwrap_or(0).unsigned_abs();
                e.max(r) > threshold
            }
            (None, None) => false,
            _ => true,
        };

        let dominant_a = dominant_leaf(&mitigated_a, &goal.tree_a);
        let dominant_b = dominant_leaf(&mitigated_b, &goal.tree_b);

        rows.push(ComparisonRow {
            key: goal.key.clone(),
            tree_a: goal.tree_a.clone(),
            tree_b: goal.tree_b.clone(),
            summary_a,
            summary_b,
            effort_delta,
            risk_delta,
            gain_delta,
            significant,
            dominant_a,
            dominant_b,
        });
    }

    Ok(ComparisonReport {
        threshold,
        mitigations: mitigations.iter().cloned().collect(),
        rows,
        only_a: matching.only_a,
        only_b: matching.only_b,
    })
}

fn feasible_triple(value: Option<&NodeValue>) -> Option<RiskTriple> {
    value.and_then(NodeValue::triple)
}

fn dominant_leaf(forest: &crate::resolve::ResolvedForest, tree: &str) -> Option<DominantLeaf> {
    let scenario = dominant_scenario(forest, tree).ok()?;
    let id = scenario.dominant_leaf().clone();
    let node = forest.node(&id)?;
    Some(DominantLeaf {
        id,
        title: node.title.clone(),
        locus: node.locus(),
    })
}
