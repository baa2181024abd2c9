//! Cross-reference resolution.
//!
//! Trees may point at shared subtrees in other trees (or elsewhere in the
//! same tree). Resolution checks that every target exists and that following
//! references can never loop, so that evaluation terminates and shared
//! subtrees are evaluated once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::{AttackNode, AttackTree, Forest, NodeId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DanglingRef {
    pub source: NodeId,
    pub target: NodeId,
}

impl fmt::Display for DanglingRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.source, self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("dangling references: {}", format_list(.0))]
    Dangling(Vec<DanglingRef>),
    #[error("reference cycle: {}", format_cycle(.0))]
    Cyclic(Vec<NodeId>),
}

fn format_list(refs: &[DanglingRef]) -> String {
    refs.iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn format_cycle(ids: &[NodeId]) -> String {
    ids.iter()
        .map(|id| id.to_string())
        .collect::<Vec<_>>()
        .join(" -> ")
}

/// A forest whose references are all bound and acyclic, together with the
/// set of nodes hypothetically mitigated (declared infeasible).
///
/// Values of this type can only be obtained through [`resolve_refs`] (and
/// extended via `apply_mitigations` in the engine), so holding one is proof
/// that reference lookups cannot fail.
#[derive(Debug, Clone)]
pub struct ResolvedForest {
    forest: Forest,
    mitigated: BTreeSet<NodeId>,
}

impl ResolvedForest {
    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn node(&self, id: &NodeId) -> Option<&AttackNode> {
        self.forest.node(id)
    }

    pub fn tree(&self, id: &str) -> Option<&AttackTree> {
        self.forest.tree(id)
    }

    pub fn mitigated(&self) -> &BTreeSet<NodeId> {
        &self.mitigated
    }

    pub fn is_mitigated(&self, id: &NodeId) -> bool {
        self.mitigated.contains(id)
    }

    pub(crate) fn with_added_mitigations(&self, extra: BTreeSet<NodeId>) -> ResolvedForest {
        let mut mitigated = self.mitigated.clone();
        mitigated.extend(extra);
        ResolvedForest {
            forest: self.forest.clone(),
            mitigated,
        }
    }
}

/// Bind every reference to its target subtree and verify the reference graph
/// is acyclic.
pub fn resolve_refs(forest: Forest) -> Result<ResolvedForest, ResolveError> {
    // Source node -> target node for every reference in the forest.
    let mut refs: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for tree in forest.trees() {
        tree.root.walk(&mut |node| {
            if let Some(target) = &node.reference {
                refs.insert(node.id.clone(), target.clone());
            }
        });
    }

    let dangling: Vec<DanglingRef> = refs
        .iter()
        .filter(|(_, target)| forest.node(target).is_none())
        .map(|(source, target)| DanglingRef {
            source: source.clone(),
            target: target.clone(),
        })
        .collect();
    if !dangling.is_empty() {
        return Err(ResolveError::Dangling(dangling));
    }

    // Evaluating a reference needs the whole target subtree, including any
    // references inside it. A cycle exists exactly when following that
    // dependency from some reference leads back to it.
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        InProgress,
        Done,
    }
    let mut states: BTreeMap<NodeId, State> = BTreeMap::new();
    let mut stack: Vec<NodeId> = Vec::new();

    fn visit(
        source: &NodeId,
        forest: &Forest,
        refs: &BTreeMap<NodeId, NodeId>,
        states: &mut BTreeMap<NodeId, State>,
        stack: &mut Vec<NodeId>,
    ) -> Result<(), ResolveError> {
        match states.get(source) {
            Some(State::Done) => return Ok(()),
            Some(State::InProgress) => {
                let start = stack.iter().position(|id| id == source).unwrap_or(0);
                let mut cycle: Vec<NodeId> = stack[start..].to_vec();
                cycle.push(source.clone());
                return Err(ResolveError::Cyclic(cycle));
            }
            None => {}
        }
        states.insert(source.clone(), State::InProgress);
        stack.push(source.clone());

        let target = &refs[source];
        let target_node = forest.node(target).expect("dangling refs checked above");
        let mut inner_refs = Vec::new();
        target_node.walk(&mut |node| {
            if refs.contains_key(&node.id) {
                inner_refs.push(node.id.clone());
            }
        });
        for inner in inner_refs {
            visit(&inner, forest, refs, states, stack)?;
        }

        stack.pop();
        states.insert(source.clone(), State::Done);
        Ok(())
    }

    for source in refs.keys() {
        visit(source, &forest, &refs, &mut states, &mut stack)?;
    }

    Ok(ResolvedForest {
        forest,
        mitigated: BTreeSet::new(),
    })
}
