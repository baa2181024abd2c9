//! Attack-tree risk analysis over annotated AND/OR forests.
//!
//! The crate models forests of attack trees whose nodes carry
//! effort/risk/gain scores, parses and emits them in a line-oriented outline
//! format and a canonical JSON form, propagates risk values bottom-up,
//! audits analyst-recorded values against mechanical propagation, extracts
//! dominant attack scenarios, evaluates what-if mitigations, checks asset
//! coverage, and compares two designs' forests goal by goal.

pub mod assets;
pub mod canonical;
pub mod compare;
pub mod engine;
pub mod model;
pub mod outline;
pub mod resolve;
pub mod validate;

pub use assets::{coverage, emit_assets, parse_assets, Asset, AssetCatalog, CoverageReport};
pub use canonical::{emit_canonical, parse_canonical, CanonicalError};
pub use compare::{compare, match_goals, ComparisonReport, ComparisonRow, GoalMatching};
pub use engine::{
    apply_mitigations, audit, dominant_scenario, propagate, what_if, AuditFinding, Evaluation,
    MitigationSet, NodeValue, Scenario, WhatIfReport,
};
pub use model::{
    AttackNode, AttackTree, Combinator, Forest, GoalKey, Locus, NodeId, Outline,
    ProtectionProperty, RiskTriple, Tag,
};
pub use outline::{emit_outline, parse_outline, ParseError, ParsedForest, SourceSpan};
pub use resolve::{resolve_refs, ResolveError, ResolvedForest};
pub use validate::{validate, Violation, ViolationKind};
