//! Structural validation of forests.
//!
//! Violations are data, not failures: the validator always returns the full
//! list so a report can show everything wrong with a document at once. The
//! outline parser already rejects most of these, but forests can also be
//! built programmatically or loaded from the canonical format, so everything
//! is re-checked on the in-memory model.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::model::{AttackNode, Combinator, Forest, NodeId, Tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationKind {
    /// A recorded triple has a component outside the 1..9 scale.
    OutOfScaleTriple,
    /// A leaf that is neither an assumption nor annotated with a triple.
    UnannotatedLeaf,
    /// Children are not numbered 1, 2, ... without gaps.
    OutlineGap,
    /// A node's outline does not extend its parent's outline by one segment.
    OutlineMismatch,
    DuplicateNodeId,
    /// Combinator inconsistent with the children: a leaf with children, an
    /// inner node without, or an AND with fewer than two children.
    BadCombinator,
    /// A node with both children and a cross-reference.
    RefAndChildren,
    /// A title the outline format cannot carry losslessly.
    BadTitle,
    /// A tree or asset identifier with forbidden characters.
    BadIdentifier,
    /// Two trees claim the same (asset, property) pair.
    DuplicateGoalKey,
}

impl ViolationKind {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ViolationKind::OutOfScaleTriple => "out-of-scale-triple",
            ViolationKind::UnannotatedLeaf => "unannotated-leaf",
            ViolationKind::OutlineGap => "outline-gap",
            ViolationKind::OutlineMismatch => "outline-mismatch",
            ViolationKind::DuplicateNodeId => "duplicate-node-id",
            ViolationKind::BadCombinator => "bad-combinator",
            ViolationKind::RefAndChildren => "ref-and-children",
            ViolationKind::BadTitle => "bad-title",
            ViolationKind::BadIdentifier => "bad-identifier",
            ViolationKind::DuplicateGoalKey => "duplicate-goal-key",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl Serialize for ViolationKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub node: NodeId,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.node, self.kind, self.message)
    }
}

/// True if the outline format can emit and re-parse this title verbatim.
///
/// Titles may not carry leading/trailing whitespace, control characters, or
/// anything that would be re-read as a structural token: a trailing `AND`
/// marker, a trailing `[...]` group, a ` -> ` arrow or an `@` tag
/// introducer.
pub fn title_is_emit_safe(title: &str) -> bool {
    !title.is_empty()
        && title.trim() == title
        && !title.chars().any(|c| c.is_control())
        && title != "AND"
        && !title.ends_with(" AND")
        && !title.ends_with(']')
        && !title.contains(" ->")
        && !title.contains(" @")
        && !title.starts_with('@')
        && !title.starts_with("->")
}

fn valid_identifier(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_'))
}

/// Collect every violation in the forest. Two calls on the same forest
/// return identical lists.
pub fn validate(forest: &Forest) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen_ids: BTreeMap<NodeId, u32> = BTreeMap::new();
    let mut goal_keys: BTreeMap<crate::model::GoalKey, Vec<String>> = BTreeMap::new();

    for tree in forest.trees() {
        if !valid_identifier(&tree.id) {
            violations.push(Violation {
                node: NodeId::root(&tree.id),
                kind: ViolationKind::BadIdentifier,
                message: format!("tree id {:?} has forbidden characters", tree.id),
            });
        }
        if !valid_identifier(&tree.asset) {
            violations.push(Violation {
                node: NodeId::root(&tree.id),
                kind: ViolationKind::BadIdentifier,
                message: format!("asset id {:?} has forbidden characters", tree.asset),
            });
        }
        if !tree.root.id.outline.is_root() {
            violations.push(Violation {
                node: tree.root.id.clone(),
                kind: ViolationKind::OutlineMismatch,
                message: "root goal must have the empty outline".into(),
            });
        }
        goal_keys
            .entry(tree.goal_key())
            .or_default()
            .push(tree.id.clone());
        tree.root.walk(&mut |node| {
            check_node(node, &mut violations);
            *seen_ids.entry(node.id.clone()).or_insert(0) += 1;
        });
    }

    for (id, count) in seen_ids {
        if count > 1 {
            violations.push(Violation {
                node: id.clone(),
                kind: ViolationKind::DuplicateNodeId,
                message: format!("node id appears {count} times"),
            });
        }
    }
    for (key, trees) in goal_keys {
        if trees.len() > 1 {
            violations.push(Violation {
                node: NodeId::root(&trees[0]),
                kind: ViolationKind::DuplicateGoalKey,
                message: format!("goal {key} claimed by trees {}", trees.join(", ")),
            });
        }
    }

    violations.sort_by(|a, b| (&a.node, a.kind).cmp(&(&b.node, b.kind)));
    violations
}

fn check_node(node: &AttackNode, violations: &mut Vec<Violation>) {
    let mut push = |kind, message: String| {
        violations.push(Violation {
            node: node.id.clone(),
            kind,
            message,
        })
    };

    if let Some(triple) = &node.recorded {
        if !triple.in_scale() {
            push(
                ViolationKind::OutOfScaleTriple,
                format!("recorded value {triple} leaves the 1..9 scale"),
            );
        }
    }

    if !title_is_emit_safe(&node.title) {
        push(
            ViolationKind::BadTitle,
            format!("title {:?} cannot be carried by the outline format", node.title),
        );
    }

    for tag in &node.tags {
        if let Tag::Custom(text) = tag {
            if text.is_empty() {
                push(ViolationKind::BadIdentifier, "empty custom tag".into());
            }
        }
    }

    if node.reference.is_some() && !node.children.is_empty() {
        push(
            ViolationKind::RefAndChildren,
            "a node has either children or a reference, not both".into(),
        );
    }

    if node.children.is_empty() {
        if node.combinator != Combinator::Leaf {
            push(
                ViolationKind::BadCombinator,
                format!("{} combinator on a node without children", node.combinator),
            );
        }
        if node.reference.is_none() && node.recorded.is_none() && !node.is_assumption() {
            push(
                ViolationKind::UnannotatedLeaf,
                "leaf carries neither a recorded value nor the assumption tag".into(),
            );
        }
    } else {
        match node.combinator {
            Combinator::Leaf => push(
                ViolationKind::BadCombinator,
                "leaf combinator on a node with children".into(),
            ),
            Combinator::And if node.children.len() < 2 => push(
                ViolationKind::BadCombinator,
                "AND requires at least two children".into(),
            ),
            _ => {}
        }

        let mut expected = 1;
        for child in &node.children {
            if child.id.tree != node.id.tree
                || child.id.outline.parent().as_ref() != Some(&node.id.outline)
            {
                push(
                    ViolationKind::OutlineMismatch,
                    format!(
                        "child {} does not extend parent outline by one segment",
                        child.id
                    ),
                );
            } else if child.id.outline.last() != Some(expected) {
                push(
                    ViolationKind::OutlineGap,
                    format!(
                        "child numbered {} where {} was expected",
                        child.id.outline.last().unwrap_or(0),
                        expected
                    ),
                );
                // Resynchronize so one gap is reported once, not cascaded.
                expected = child.id.outline.last().unwrap_or(expected);
            }
            expected += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttackTree, ProtectionProperty, RiskTriple};
    use std::collections::BTreeSet;

    fn leaf(tree: &str, outline: &str, triple: Option<RiskTriple>) -> AttackNode {
        AttackNode {
            id: NodeId::new(tree, outline.parse().unwrap()),
            title: format!("leaf {outline}"),
            combinator: Combinator::Leaf,
            recorded: triple,
            reference: None,
            tags: BTreeSet::new(),
            children: Vec::new(),
        }
    }

    fn tree_with_children(children: Vec<AttackNode>) -> Forest {
        let root = AttackNode {
            id: NodeId::root("T"),
            title: "goal".into(),
            combinator: if children.is_empty() {
                Combinator::Leaf
            } else {
                Combinator::Or
            },
            recorded: Some(RiskTriple::new(1, 1, 1).unwrap()),
            reference: None,
            tags: BTreeSet::new(),
            children,
        };
        Forest::from_trees([AttackTree {
            id: "T".into(),
            title: "goal".into(),
            asset: "asset".into(),
            property: ProtectionProperty::Integrity,
            root,
        }])
        .unwrap()
    }

    #[test]
    fn unannotated_leaf_is_flagged() {
        let forest = tree_with_children(vec![leaf("T", "1", None)]);
        let violations = validate(&forest);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].kind, ViolationKind::UnannotatedLeaf);
        assert_eq!(violations[0].node.to_string(), "T:1");
    }

    #[test]
    fn assumption_leaf_needs_no_triple() {
        let mut node = leaf("T", "1", None);
        node.tags.insert(Tag::Assumption);
        let other = leaf("T", "2", Some(RiskTriple::new(2, 2, 2).unwrap()));
        let forest = tree_with_children(vec![node, other]);
        assert!(validate(&forest).is_empty());
    }

    #[test]
    fn outline_gap_is_flagged() {
        let forest = tree_with_children(vec![
            leaf("T", "1", Some(RiskTriple::new(1, 1, 1).unwrap())),
            leaf("T", "3", Some(RiskTriple::new(1, 1, 1).unwrap())),
        ]);
        let violations = validate(&forest);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].kind, ViolationKind::OutlineGap);
    }

    #[test]
    fn validate_is_idempotent() {
        let forest = tree_with_children(vec![leaf("T", "1", None), leaf("T", "3", None)]);
        assert_eq!(validate(&forest), validate(&forest));
    }

    #[test]
    fn emit_safe_titles() {
        assert!(title_is_emit_safe("Punch hole through firewall"));
        assert!(title_is_emit_safe("Social engineering/cooperation (e.g. phishing)"));
        assert!(!title_is_emit_safe(""));
        assert!(!title_is_emit_safe(" padded "));
        assert!(!title_is_emit_safe("overwrite the keys AND"));
        assert!(!title_is_emit_safe("looks like a value [1/2/3]"));
        assert!(!title_is_emit_safe("see -> there"));
        assert!(!title_is_emit_safe("tagged @assumption"));
    }
}
