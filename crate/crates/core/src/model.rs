//! Domain model for annotated AND/OR attack forests.
//!
//! An attack tree refines an attacker goal into sub-goals: at an OR node any
//! child suffices to achieve the parent goal, at an AND node all children are
//! needed. Leaves are concrete attacks annotated with an effort/risk/gain
//! triple on a 1..9 scale. Trees are bound to an (asset, protection property)
//! pair and may cross-reference shared subtrees in other trees, which makes a
//! forest a DAG once resolved.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

/// Lower bound of the effort/risk/gain scale.
pub const SCALE_MIN: u8 = 1;
/// Upper bound of the effort/risk/gain scale.
pub const SCALE_MAX: u8 = 9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{component} score {value} is outside the {SCALE_MIN}..={SCALE_MAX} scale")]
    OutOfScale { component: &'static str, value: i64 },
    #[error("invalid outline {text:?}: {reason}")]
    BadOutline { text: String, reason: String },
    #[error("invalid node id {text:?}: {reason}")]
    BadNodeId { text: String, reason: String },
    #[error("invalid tag {text:?}: {reason}")]
    BadTag { text: String, reason: String },
    #[error("unknown protection property {0:?}")]
    UnknownProperty(String),
    #[error("duplicate tree id {0:?}")]
    DuplicateTree(String),
}

/// The (effort, risk to the attacker, gain) annotation on a node.
///
/// Effort combines the time and money an attack costs; risk is the attacker's
/// own exposure when attempting it. Both describe the attack in the context
/// of its goal. Gain is the attacker's general motivation for the capability
/// the node represents, independent of the surrounding tree, and is therefore
/// never propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RiskTriple {
    pub effort: u8,
    pub risk: u8,
    pub gain: u8,
}

impl RiskTriple {
    /// Build a triple, rejecting components outside the 1..9 scale.
    pub fn new(effort: u8, risk: u8, gain: u8) -> Result<Self, ModelError> {
        for (component, value) in [("effort", effort), ("risk", risk), ("gain", gain)] {
            if !(SCALE_MIN..=SCALE_MAX).contains(&value) {
                return Err(ModelError::OutOfScale {
                    component,
                    value: i64::from(value),
                });
            }
        }
        Ok(Self { effort, risk, gain })
    }

    /// Sort key for attacker preference: cheaper first, then safer for the
    /// attacker, then more rewarding. Smaller keys are more attractive.
    pub fn attractiveness(&self) -> (u8, u8, Reverse<u8>) {
        (self.effort, self.risk, Reverse(self.gain))
    }

    /// Strict order: `self` is a more attractive attack than `other`.
    pub fn more_attractive_than(&self, other: &RiskTriple) -> bool {
        self.attractiveness() < other.attractiveness()
    }

    pub fn in_scale(&self) -> bool {
        [self.effort, self.risk, self.gain]
            .iter()
            .all(|v| (SCALE_MIN..=SCALE_MAX).contains(v))
    }
}

impl fmt::Display for RiskTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.effort, self.risk, self.gain)
    }
}

/// Dotted outline number locating a node within its tree, e.g. `4.3.3.4`.
/// The root goal has the empty outline.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Outline(Vec<u32>);

impl Outline {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn from_segments(segments: Vec<u32>) -> Result<Self, ModelError> {
        if segments.contains(&0) {
            return Err(ModelError::BadOutline {
                text: segments
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join("."),
                reason: "segments must be positive".into(),
            });
        }
        Ok(Self(segments))
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn segments(&self) -> &[u32] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn last(&self) -> Option<u32> {
        self.0.last().copied()
    }

    /// The outline of this node's parent; `None` for the root.
    pub fn parent(&self) -> Option<Outline> {
        if self.0.is_empty() {
            None
        } else {
            Some(Outline(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, segment: u32) -> Outline {
        let mut segs = self.0.clone();
        segs.push(segment);
        Outline(segs)
    }

    /// True if `self` lies on or below `other` in the same tree.
    pub fn starts_with(&self, other: &Outline) -> bool {
        self.0.len() >= other.0.len() && self.0[..other.0.len()] == other.0
    }
}

impl fmt::Display for Outline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for seg in &self.0 {
            if !first {
                write!(f, ".")?;
            }
            write!(f, "{seg}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for Outline {
    type Err = ModelError;

    /// Parse a dotted outline number; the empty string is the root outline.
    fn from_str(s: &str) -> Result<Self, ModelError> {
        if s.is_empty() {
            return Ok(Outline::root());
        }
        let mut segments = Vec::new();
        for part in s.split('.') {
            let seg: u32 = part.parse().map_err(|_| ModelError::BadOutline {
                text: s.into(),
                reason: format!("segment {part:?} is not a positive integer"),
            })?;
            if seg == 0 {
                return Err(ModelError::BadOutline {
                    text: s.into(),
                    reason: "segments must be positive".into(),
                });
            }
            segments.push(seg);
        }
        Ok(Outline(segments))
    }
}

/// Identifies one node in a forest: the tree it lives in plus its outline.
/// Displays as `tree:outline`; a bare tree id names that tree's root goal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub tree: String,
    pub outline: Outline,
}

fn valid_tree_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_'))
}

impl NodeId {
    pub fn new(tree: impl Into<String>, outline: Outline) -> Self {
        Self {
            tree: tree.into(),
            outline,
        }
    }

    pub fn root(tree: impl Into<String>) -> Self {
        Self::new(tree, Outline::root())
    }

    pub fn is_root(&self) -> bool {
        self.outline.is_root()
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.outline.is_root() {
            write!(f, "{}", self.tree)
        } else {
            write!(f, "{}:{}", self.tree, self.outline)
        }
    }
}

impl FromStr for NodeId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        let (tree, outline) = match s.split_once(':') {
            Some((tree, rest)) => (tree, rest.parse::<Outline>()?),
            None => (s, Outline::root()),
        };
        if !valid_tree_id(tree) {
            return Err(ModelError::BadNodeId {
                text: s.into(),
                reason: "tree id must be non-empty and use only letters, digits, '.', '-', '_'"
                    .into(),
            });
        }
        Ok(NodeId::new(tree, outline))
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Where an attack takes place relative to the system under analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Locus {
    System,
    User,
    Environment,
}

impl Locus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Locus::System => "system",
            Locus::User => "user",
            Locus::Environment => "environment",
        }
    }
}

impl fmt::Display for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Locus {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Node markers. A few names are reserved; anything else is free-form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    /// Environmental precondition that carries no cost of its own and is
    /// excluded from propagation.
    Assumption,
    /// The recorded value's provenance is uncertain; excluded from value
    /// matching and from audit.
    Unverified,
    /// Where the attack lives: in the system, with the user, or in the wider
    /// environment.
    Locus(Locus),
    Custom(String),
}

fn valid_custom_tag(text: &str) -> bool {
    !text.is_empty()
        && text
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_'))
}

impl Tag {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        match text {
            "assumption" => Ok(Tag::Assumption),
            "unverified" => Ok(Tag::Unverified),
            "locus(system)" => Ok(Tag::Locus(Locus::System)),
            "locus(user)" => Ok(Tag::Locus(Locus::User)),
            "locus(environment)" => Ok(Tag::Locus(Locus::Environment)),
            _ if text.starts_with("locus(") => Err(ModelError::BadTag {
                text: text.into(),
                reason: "locus takes exactly one of system, user, environment".into(),
            }),
            _ if valid_custom_tag(text) => Ok(Tag::Custom(text.into())),
            _ => Err(ModelError::BadTag {
                text: text.into(),
                reason: "tags use only letters, digits, '.', '-', '_'".into(),
            }),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Assumption => f.write_str("assumption"),
            Tag::Unverified => f.write_str("unverified"),
            Tag::Locus(locus) => write!(f, "locus({locus})"),
            Tag::Custom(text) => f.write_str(text),
        }
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Protection a critical asset requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtectionProperty {
    Integrity,
    Confidentiality,
    Availability,
}

impl ProtectionProperty {
    pub const ALL: [ProtectionProperty; 3] = [
        ProtectionProperty::Integrity,
        ProtectionProperty::Confidentiality,
        ProtectionProperty::Availability,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProtectionProperty::Integrity => "integrity",
            ProtectionProperty::Confidentiality => "confidentiality",
            ProtectionProperty::Availability => "availability",
        }
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        match text {
            "integrity" => Ok(ProtectionProperty::Integrity),
            "confidentiality" => Ok(ProtectionProperty::Confidentiality),
            "availability" => Ok(ProtectionProperty::Availability),
            _ => Err(ModelError::UnknownProperty(text.into())),
        }
    }
}

impl fmt::Display for ProtectionProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ProtectionProperty {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// How a node's children combine. Leaf nodes have no children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Combinator {
    Or,
    And,
    Leaf,
}

impl Combinator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Combinator::Or => "or",
            Combinator::And => "and",
            Combinator::Leaf => "leaf",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "or" => Some(Combinator::Or),
            "and" => Some(Combinator::And),
            "leaf" => Some(Combinator::Leaf),
            _ => None,
        }
    }
}

impl fmt::Display for Combinator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Combinator {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// One goal in an attack tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackNode {
    pub id: NodeId,
    pub title: String,
    pub combinator: Combinator,
    /// The analyst's recorded annotation. Internal nodes usually carry one
    /// even though a value can be computed; `audit` compares the two.
    pub recorded: Option<RiskTriple>,
    /// Cross-reference to a shared subtree that is evaluated in place of this
    /// node. A node has children or a reference, never both.
    pub reference: Option<NodeId>,
    pub tags: BTreeSet<Tag>,
    pub children: Vec<AttackNode>,
}

impl AttackNode {
    pub fn has_tag(&self, tag: &Tag) -> bool {
        self.tags.contains(tag)
    }

    pub fn is_assumption(&self) -> bool {
        self.tags.contains(&Tag::Assumption)
    }

    pub fn is_unverified(&self) -> bool {
        self.tags.contains(&Tag::Unverified)
    }

    pub fn locus(&self) -> Option<Locus> {
        self.tags.iter().find_map(|t| match t {
            Tag::Locus(locus) => Some(*locus),
            _ => None,
        })
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Depth-first walk over this node and all descendants.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a AttackNode)) {
        visit(self);
        for child in &self.children {
            child.walk(visit);
        }
    }

    /// Locate a descendant (or this node) by outline within the same tree.
    pub fn descendant(&self, outline: &Outline) -> Option<&AttackNode> {
        if !outline.starts_with(&self.id.outline) {
            return None;
        }
        let mut node = self;
        for seg in &outline.segments()[self.id.outline.depth()..] {
            node = node
                .children
                .iter()
                .find(|c| c.id.outline.last() == Some(*seg))?;
        }
        Some(node)
    }
}

/// The (asset, protection property) pair a tree defends; the unit of
/// cross-design comparison.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GoalKey {
    pub asset: String,
    pub property: ProtectionProperty,
}

impl fmt::Display for GoalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.asset, self.property)
    }
}

/// One attack tree: a root goal bound to an asset and a protection property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackTree {
    pub id: String,
    pub title: String,
    pub asset: String,
    pub property: ProtectionProperty,
    pub root: AttackNode,
}

impl AttackTree {
    pub fn goal_key(&self) -> GoalKey {
        GoalKey {
            asset: self.asset.clone(),
            property: self.property,
        }
    }

    pub fn root_id(&self) -> NodeId {
        NodeId::root(&self.id)
    }

    pub fn node(&self, outline: &Outline) -> Option<&AttackNode> {
        self.root.descendant(outline)
    }
}

/// All trees of one design, keyed by tree id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Forest {
    trees: BTreeMap<String, AttackTree>,
}

impl Forest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_trees(trees: impl IntoIterator<Item = AttackTree>) -> Result<Self, ModelError> {
        let mut forest = Forest::new();
        for tree in trees {
            forest.insert(tree)?;
        }
        Ok(forest)
    }

    pub fn insert(&mut self, tree: AttackTree) -> Result<(), ModelError> {
        if self.trees.contains_key(&tree.id) {
            return Err(ModelError::DuplicateTree(tree.id));
        }
        self.trees.insert(tree.id.clone(), tree);
        Ok(())
    }

    pub fn tree(&self, id: &str) -> Option<&AttackTree> {
        self.trees.get(id)
    }

    /// Trees in ascending id order.
    pub fn trees(&self) -> impl Iterator<Item = &AttackTree> {
        self.trees.values()
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn node(&self, id: &NodeId) -> Option<&AttackNode> {
        self.tree(&id.tree)?.node(&id.outline)
    }

    /// Every node id in the forest, in (tree, outline) order.
    pub fn node_ids(&self) -> Vec<NodeId> {
        let mut ids = Vec::new();
        for tree in self.trees() {
            tree.root.walk(&mut |node| ids.push(node.id.clone()));
        }
        ids.sort();
        ids
    }
}
