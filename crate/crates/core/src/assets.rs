//! Critical-asset catalog and goal-coverage checking.
//!
//! The catalog lists what needs protecting and which properties each asset
//! requires; coverage checks that a forest has one tree per required
//! (asset, property) pair and flags trees defending goals the catalog never
//! asked for.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Forest, GoalKey, ProtectionProperty};

/// One asset worth protecting, with the properties it requires and a short
/// impact narrative per property.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Asset {
    pub id: String,
    pub name: String,
    pub required: BTreeSet<ProtectionProperty>,
    pub impact: BTreeMap<ProtectionProperty, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct AssetCatalog {
    assets: Vec<Asset>,
}

impl AssetCatalog {
    pub fn assets(&self) -> &[Asset] {
        &self.assets
    }

    pub fn get(&self, id: &str) -> Option<&Asset> {
        self.assets.iter().find(|a| a.id == id)
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    /// Every (asset, property) pair the catalog requires, sorted.
    pub fn required_pairs(&self) -> Vec<GoalKey> {
        let mut pairs: Vec<GoalKey> = self
            .assets
            .iter()
            .flat_map(|asset| {
                asset.required.iter().map(|property| GoalKey {
                    asset: asset.id.clone(),
                    property: *property,
                })
            })
            .collect();
        pairs.sort();
        pairs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssetError {
    #[error("line {line}: unknown protection property {name:?}")]
    UnknownProperty { line: usize, name: String },
    #[error("line {line}: duplicate asset {id:?}")]
    DuplicateAsset { line: usize, id: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Parse the record-oriented catalog format: records separated by blank
/// lines, fields `id:`, `name:`, `requires:` and `impact.<property>:`, with
/// `#` comments ignored.
pub fn parse_assets(text: &str) -> Result<AssetCatalog, AssetError> {
    struct Draft {
        line: usize,
        id: Option<String>,
        name: Option<String>,
        required: BTreeSet<ProtectionProperty>,
        impact: BTreeMap<ProtectionProperty, String>,
    }

    let mut assets: Vec<Asset> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut draft: Option<Draft> = None;

    let finish = |draft: Option<Draft>, assets: &mut Vec<Asset>, seen: &mut BTreeSet<String>| {
        let Some(d) = draft else { return Ok(()) };
        let id = d.id.ok_or(AssetError::Malformed {
            line: d.line,
            message: "record without an id field".into(),
        })?;
        if !seen.insert(id.clone()) {
            return Err(AssetError::DuplicateAsset { line: d.line, id });
        }
        if d.required.is_empty() {
            return Err(AssetError::Malformed {
                line: d.line,
                message: format!("asset {id:?} requires no protection property"),
            });
        }
        assets.push(Asset {
            name: d.name.unwrap_or_else(|| id.clone()),
            id,
            required: d.required,
            impact: d.impact,
        });
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            finish(draft.take(), &mut assets, &mut seen)?;
            continue;
        }
        let (key, value) = line.split_once(':').ok_or(AssetError::Malformed {
            line: lineno,
            message: format!("expected `field: value`, got {line:?}"),
        })?;
        let key = key.trim();
        let value = value.trim().to_string();
        let d = draft.get_or_insert_with(|| Draft {
            line: lineno,
            id: None,
            name: None,
            required: BTreeSet::new(),
            impact: BTreeMap::new(),
        });
        match key {
            "id" => d.id = Some(value),
            "name" => d.name = Some(value),
            "requires" => {
                for part in value.split(',') {
                    let name = part.trim();
                    let property = ProtectionProperty::parse(name).map_err(|_| {
                        AssetError::UnknownProperty {
                            line: lineno,
                            name: name.to_string(),
                        }
                    })?;
                    d.required.insert(property);
                }
            }
            _ => match key.strip_prefix("impact.") {
                Some(name) => {
                    let property = ProtectionProperty::parse(name).map_err(|_| {
                        AssetError::UnknownProperty {
                            line: lineno,
                            name: name.to_string(),
                        }
                    })?;
                    d.impact.insert(property, value);
                }
                None => {
                    return Err(AssetError::Malformed {
                        line: lineno,
                        message: format!("unknown field {key:?}"),
                    })
                }
            },
        }
    }
    finish(draft.take(), &mut assets, &mut seen)?;

    Ok(AssetCatalog { assets })
}

/// Emit the catalog in the record format; `parse_assets` reads it back
/// losslessly.
pub fn emit_assets(catalog: &AssetCatalog) -> String {
    let mut out = String::new();
    for (i, asset) in catalog.assets.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("id: {}\n", asset.id));
        out.push_str(&format!("name: {}\n", asset.name));
        let required: Vec<&str> = asset.required.iter().map(|p| p.as_str()).collect();
        out.push_str(&format!("requires: {}\n", required.join(", ")));
        for (property, text) in &asset.impact {
            out.push_str(&format!("impact.{property}: {text}\n"));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoveredPair {
    pub key: GoalKey,
    pub tree: String,
}

/// Which required goals the forest defends, which it misses, and which trees
/// defend goals the catalog never required.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub covered: Vec<CoveredPair>,
    pub missing: Vec<GoalKey>,
    pub surplus: Vec<CoveredPair>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty() && self.surplus.is_empty()
    }
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} covered, {} missing, {} surplus",
            self.covered.len(),
            self.missing.len(),
            self.surplus.len()
        )
    }
}

/// Check the forest's goals against the catalog's required pairs. The result
/// depends only on the trees' goal keys, never on their order.
pub fn coverage(catalog: &AssetCatalog, forest: &Forest) -> CoverageReport {
    let required: BTreeSet<GoalKey> = catalog.required_pairs().into_iter().collect();
    let mut covered = Vec::new();
    let mut surplus = Vec::new();
    let mut present: BTreeSet<GoalKey> = BTreeSet::new();

    let mut trees: Vec<_> = forest.trees().collect();
    trees.sort_by(|a, b| (a.goal_key(), &a.id).cmp(&(b.goal_key(), &b.id)));
    for tree in trees {
        let key = tree.goal_key();
        let pair = CoveredPair {
            key: key.clone(),
            tree: tree.id.clone(),
        };
        if required.contains(&key) {
            covered.push(pair);
        } else {
            surplus.push(pair);
        }
        present.insert(key);
    }

    let missing = required
        .into_iter()
        .filter(|key| !present.contains(key))
        .collect();

    CoverageReport {
        covered,
        missing,
        surplus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttackNode, AttackTree, Combinator, NodeId, RiskTriple};

    const SAMPLE: &str = "\
# two assets
id: web-of-trust
name: Web of Trust
requires: integrity, confidentiality
impact.integrity: faked verification
impact.confidentiality: relationship data leaks

id: revocation-information
name: Revocation Information
requires: integrity, availability
impact.availability: status lookups fail
";

    #[test]
    fn parses_records() {
        let catalog = parse_assets(SAMPLE).unwrap();
        assert_eq!(catalog.len(), 2);
        let revocation = catalog.get("revocation-information").unwrap();
        assert!(revocation.required.contains(&ProtectionProperty::Integrity));
        assert!(revocation
            .required
            .contains(&ProtectionProperty::Availability));
        assert!(!revocation
            .required
            .contains(&ProtectionProperty::Confidentiality));
    }

    #[test]
    fn unknown_property_is_rejected() {
        let err = parse_assets("id: a\nname: A\nrequires: secrecy\n").unwrap_err();
        assert!(matches!(err, AssetError::UnknownProperty { .. }));
    }

    #[test]
    fn duplicate_asset_is_rejected() {
        let text = "id: a\nname: A\nrequires: integrity\n\nid: a\nname: A again\nrequires: integrity\n";
        assert!(matches!(
            parse_assets(text),
            Err(AssetError::DuplicateAsset { .. })
        ));
    }

    #[test]
    fn emit_parse_roundtrip() {
        let catalog = parse_assets(SAMPLE).unwrap();
        let emitted = emit_assets(&catalog);
        assert_eq!(parse_assets(&emitted).unwrap(), catalog);
        assert_eq!(emit_assets(&parse_assets(&emitted).unwrap()), emitted);
    }

    fn tree(id: &str, asset: &str, property: ProtectionProperty) -> AttackTree {
        AttackTree {
            id: id.into(),
            title: id.into(),
            asset: asset.into(),
            property,
            root: AttackNode {
                id: NodeId::root(id),
                title: id.into(),
                combinator: Combinator::Leaf,
                recorded: Some(RiskTriple::new(1, 1, 1).unwrap()),
                reference: None,
                tags: Default::default(),
                children: Vec::new(),
            },
        }
    }

    #[test]
    fn empty_forest_misses_everything() {
        let catalog = parse_assets(SAMPLE).unwrap();
        let report = coverage(&catalog, &Forest::new());
        assert_eq!(report.covered.len(), 0);
        assert_eq!(report.missing.len(), 4);
        assert_eq!(report.surplus.len(), 0);
    }

    #[test]
    fn surplus_tree_is_reported() {
        let catalog = parse_assets(SAMPLE).unwrap();
        let forest = Forest::from_trees([
            tree("T.1", "web-of-trust", ProtectionProperty::Integrity),
            tree("T.2", "user-data", ProtectionProperty::Availability),
        ])
        .unwrap();
        let report = coverage(&catalog, &forest);
        assert_eq!(report.covered.len(), 1);
        assert_eq!(report.missing.len(), 3);
        assert_eq!(report.surplus.len(), 1);
        assert_eq!(report.surplus[0].key.asset, "user-data");
    }
}
