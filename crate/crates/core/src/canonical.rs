//! Canonical JSON interchange form (`.atk.json` files).
//!
//! Lossless and byte-stable: emission uses a fixed field order, two-space
//! indentation, sorted trees and sorted tags, so emitting the same forest
//! twice yields identical bytes. The document carries a format version,
//! currently 1.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{
    AttackNode, AttackTree, Combinator, Forest, NodeId, Outline, ProtectionProperty, RiskTriple,
    Tag,
};

pub const FORMAT_VERSION: u32 = 1;

/// A schema violation, with the path of the offending value, e.g.
/// `trees[2].root.children[0].recorded.effort`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for CanonicalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {}: {}", self.path, self.message)
    }
}

impl std::error::Error for CanonicalError {}

fn err(path: impl Into<String>, message: impl Into<String>) -> CanonicalError {
    CanonicalError {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Serialize, Deserialize)]
struct DocDto {
    version: i64,
    trees: Vec<TreeDto>,
}

#[derive(Serialize, Deserialize)]
struct TreeDto {
    id: String,
    title: String,
    asset: String,
    property: String,
    root: NodeDto,
}

#[derive(Serialize, Deserialize)]
struct NodeDto {
    outline: String,
    title: String,
    combinator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recorded: Option<TripleDto>,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    children: Vec<NodeDto>,
}

#[derive(Serialize, Deserialize)]
struct TripleDto {
    effort: i64,
    risk: i64,
    gain: i64,
}

/// Parse the canonical form, reporting schema violations with their path.
pub fn parse_canonical(text: &str) -> Result<Forest, CanonicalError> {
    let doc: DocDto =
        serde_json::from_str(text).map_err(|e| err("$", format!("invalid document: {e}")))?;
    if doc.version != i64::from(FORMAT_VERSION) {
        return Err(err(
            "version",
            format!("unsupported format version {} (expected {FORMAT_VERSION})", doc.version),
        ));
    }

    let mut forest = Forest::new();
    for (i, tree) in doc.trees.into_iter().enumerate() {
        let path = format!("trees[{i}]");
        let property = ProtectionProperty::parse(&tree.property)
            .map_err(|e| err(format!("{path}.property"), e.to_string()))?;
        let root = convert_node(tree.root, &tree.id, &format!("{path}.root"))?;
        forest
            .insert(AttackTree {
                id: tree.id,
                title: tree.title,
                asset: tree.asset,
                property,
                root,
            })
            .map_err(|e| err(format!("{path}.id"), e.to_string()))?;
    }
    Ok(forest)
}

fn convert_node(dto: NodeDto, tree_id: &str, path: &str) -> Result<AttackNode, CanonicalError> {
    let outline: Outline = dto
        .outline
        .parse()
        .map_err(|e: crate::model::ModelError| err(format!("{path}.outline"), e.to_string()))?;
    let combinator = Combinator::parse(&dto.combinator).ok_or_else(|| {
        err(
            format!("{path}.combinator"),
            format!("expected or/and/leaf, got {:?}", dto.combinator),
        )
    })?;
    let recorded = match dto.recorded {
        Some(triple) => Some(convert_triple(triple, &format!("{path}.recorded"))?),
        None => None,
    };
    let reference = match dto.reference {
        Some(text) => Some(
            text.parse::<NodeId>()
                .map_err(|e| err(format!("{path}.ref"), e.to_string()))?,
        ),
        None => None,
    };
    let mut tags = std::collections::BTreeSet::new();
    for (i, text) in dto.tags.iter().enumerate() {
        tags.insert(
            Tag::parse(text).map_err(|e| err(format!("{path}.tags[{i}]"), e.to_string()))?,
        );
    }
    let mut children = Vec::with_capacity(dto.children.len());
    for (i, child) in dto.children.into_iter().enumerate() {
        children.push(convert_node(
            child,
            tree_id,
            &format!("{path}.children[{i}]"),
        )?);
    }
    Ok(AttackNode {
        id: NodeId::new(tree_id, outline),
        title: dto.title,
        combinator,
        recorded,
        reference,
        tags,
        children,
    })
}

fn convert_triple(dto: TripleDto, path: &str) -> Result<RiskTriple, CanonicalError> {
    for (component, value) in [("effort", dto.effort), ("risk", dto.risk), ("gain", dto.gain)] {
        if !(1..=9).contains(&value) {
            return Err(err(
                format!("{path}.{component}"),
                format!("score {value} is outside the 1..9 scale"),
            ));
        }
    }
    Ok(RiskTriple {
        effort: dto.effort as u8,
        risk: dto.risk as u8,
        gain: dto.gain as u8,
    })
}

/// Emit the canonical form. Byte-stable: emitting a re-parsed document
/// reproduces it exactly.
pub fn emit_canonical(forest: &Forest) -> String {
    let doc = DocDto {
        version: i64::from(FORMAT_VERSION),
        trees: forest.trees().map(tree_dto).collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("forest serialization is infallible");
    text.push('\n');
    text
}

fn tree_dto(tree: &AttackTree) -> TreeDto {
    TreeDto {
        id: tree.id.clone(),
        title: tree.title.clone(),
        asset: tree.asset.clone(),
        property: tree.property.to_string(),
        root: node_dto(&tree.root),
    }
}

fn node_dto(node: &AttackNode) -> NodeDto {
    NodeDto {
        outline: node.id.outline.to_string(),
        title: node.title.clone(),
        combinator: node.combinator.to_string(),
        recorded: node.recorded.map(|t| TripleDto {
            effort: i64::from(t.effort),
            risk: i64::from(t.risk),
            gain: i64::from(t.gain),
        }),
        reference: node.reference.as_ref().map(|r| r.to_string()),
        tags: node.tags.iter().map(|t| t.to_string()).collect(),
        children: node.children.iter().map(node_dto).collect(),
    }
}
