//! Deterministic text rendering: identical reports yield identical bytes.
//! Tables are GitHub-flavoured markdown; structured output reuses the core
//! report types' serialization.

use std::path::Path;

use serde::Serialize;

use risktree_core::assets::CoverageReport;
use risktree_core::compare::ComparisonReport;
use risktree_core::engine::{AuditFinding, Evaluation, NodeValue, Scenario, WhatIfReport};
use risktree_core::model::{AttackTree, Forest, NodeId, RiskTriple};
use risktree_core::resolve::{ResolveError, ResolvedForest};
use risktree_core::validate::Violation;

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str(&format!(
        "|{}|\n",
        header.iter().map(|_| "---").collect::<Vec<_>>().join("|")
    ));
    for row in rows {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

fn triple_or(value: Option<RiskTriple>, fallback: &str) -> String {
    value.map_or_else(|| fallback.to_string(), |t| t.to_string())
}

fn effort_risk(value: &NodeValue) -> String {
    match value {
        NodeValue::Feasible { value, .. } => format!("{value}"),
        NodeValue::Infeasible => "infeasible".into(),
        NodeValue::Excluded => "assumption".into(),
    }
}

/// Non-zero effort/risk deltas in reading order, e.g. `risk -1`.
fn delta_column(effort: Option<i16>, risk: Option<i16>) -> String {
    let mut parts = Vec::new();
    if let Some(d) = effort {
        if d != 0 {
            parts.push(format!("effort {d:+}"));
        }
    }
    if let Some(d) = risk {
        if d != 0 {
            parts.push(format!("risk {d:+}"));
        }
    }
    if parts.is_empty() {
        "-".into()
    } else {
        parts.join(", ")
    }
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct ValidationReport {
    pub file: String,
    pub trees: usize,
    pub violations: Vec<Violation>,
    /// Reference problems found while resolving, rendered as text.
    pub resolution: Option<String>,
}

impl ValidationReport {
    pub fn new(
        path: &Path,
        forest: &Forest,
        violations: Vec<Violation>,
        resolution: Option<ResolveError>,
    ) -> Self {
        Self {
            file: path.display().to_string(),
            trees: forest.len(),
            violations,
            resolution: resolution.map(|e| e.to_string()),
        }
    }

    pub fn clean(&self) -> bool {
        self.violations.is_empty() && self.resolution.is_none()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.trees == 0 {
            out.push_str(&format!("{}: no trees found\n", self.file));
            return out;
        }
        if self.clean() {
            out.push_str(&format!("{}: {} trees, no violations\n", self.file, self.trees));
            return out;
        }
        out.push_str(&format!(
            "{}: {} trees, {} violation(s)\n",
            self.file,
            self.trees,
            self.violations.len()
        ));
        let rows: Vec<Vec<String>> = self
            .violations
            .iter()
            .map(|v| {
                vec![
                    v.node.to_string(),
                    v.kind.code().to_string(),
                    v.message.clone(),
                ]
            })
            .collect();
        if !rows.is_empty() {
            out.push_str(&table(&["node", "violation", "detail"], &rows));
        }
        if let Some(resolution) = &self.resolution {
            out.push_str(&format!("{resolution}\n"));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct TreeValue {
    pub tree: String,
    pub asset: String,
    pub property: String,
    pub computed: Option<RiskTriple>,
    pub recorded: Option<RiskTriple>,
    pub feasible: bool,
}

#[derive(Serialize)]
pub struct EvalReport {
    pub trees: Vec<TreeValue>,
}

pub fn eval_report(trees: &[&AttackTree], evaluation: &Evaluation) -> EvalReport {
    EvalReport {
        trees: trees
            .iter()
            .map(|tree| {
                let value = evaluation.root_value(&tree.id);
                TreeValue {
                    tree: tree.id.clone(),
                    asset: tree.asset.clone(),
                    property: tree.property.to_string(),
                    computed: value.and_then(NodeValue::triple),
                    recorded: tree.root.recorded,
                    feasible: value.is_some_and(NodeValue::is_feasible),
                }
            })
            .collect(),
    }
}

#[derive(Serialize)]
pub struct NodeDetail {
    pub node: String,
    pub title: String,
    pub recorded: Option<RiskTriple>,
    pub computed: Option<RiskTriple>,
    pub state: String,
}

#[derive(Serialize)]
pub struct TreeDetailReport {
    pub tree: String,
    pub asset: String,
    pub property: String,
    pub nodes: Vec<NodeDetail>,
}

pub fn eval_nodes_report(tree: &AttackTree, evaluation: &Evaluation) -> TreeDetailReport {
    let mut nodes = Vec::new();
    tree.root.walk(&mut |node| {
        let value = evaluation.value(&node.id);
        nodes.push(NodeDetail {
            node: node.id.to_string(),
            title: node.title.clone(),
            recorded: node.recorded,
            computed: value.and_then(NodeValue::triple),
            state: value.map_or("-".into(), |v| match v {
                NodeValue::Feasible { .. } => "feasible".into(),
                NodeValue::Infeasible => "infeasible".into(),
                NodeValue::Excluded => "assumption".into(),
            }),
        });
    });
    TreeDetailReport {
        tree: tree.id.clone(),
        asset: tree.asset.clone(),
        property: tree.property.to_string(),
        nodes,
    }
}

pub fn eval_summary(trees: &[&AttackTree], evaluation: &Evaluation) -> String {
    let rows: Vec<Vec<String>> = trees
        .iter()
        .map(|tree| {
            let value = evaluation.root_value(&tree.id);
            vec![
                tree.id.clone(),
                tree.asset.clone(),
                tree.property.to_string(),
                value.map_or("-".into(), effort_risk),
                triple_or(tree.root.recorded, "-"),
            ]
        })
        .collect();
    table(&["tree", "asset", "property", "computed", "recorded"], &rows)
}

pub fn eval_tree_detail(tree: &AttackTree, evaluation: &Evaluation) -> String {
    let root = evaluation
        .root_value(&tree.id)
        .map_or("-".into(), effort_risk);
    let mut out = format!(
        "tree {} ({}, {}): root {}\n",
        tree.id, tree.asset, tree.property, root
    );
    let mut rows = Vec::new();
    tree.root.walk(&mut |node| {
        let value = evaluation.value(&node.id);
        rows.push(vec![
            node.id.to_string(),
            node.title.clone(),
            triple_or(node.recorded, "-"),
            value.map_or("-".into(), effort_risk),
        ]);
    });
    out.push_str(&table(&["node", "title", "recorded", "computed"], &rows));
    out
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct AuditReport<'a> {
    pub findings: &'a [AuditFinding],
}

pub fn audit_table(findings: &[AuditFinding]) -> String {
    if findings.is_empty() {
        return "no findings: recorded values match mechanical propagation\n".into();
    }
    let rows: Vec<Vec<String>> = findings
        .iter()
        .map(|f| {
            vec![
                f.node.to_string(),
                f.title.clone(),
                f.recorded.to_string(),
                format!("{}/{}", f.computed_effort, f.computed_risk),
                delta_column(Some(f.effort_delta()), Some(f.risk_delta())),
            ]
        })
        .collect();
    format!(
        "{} finding(s): recorded values differing from propagation\n{}",
        findings.len(),
        table(
            &["node", "title", "recorded", "computed", "recorded - computed"],
            &rows
        )
    )
}

// ---------------------------------------------------------------------------
// dominant
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct DominantEntry {
    pub tree: String,
    pub scenario: Option<Scenario>,
}

#[derive(Serialize)]
pub struct DominantReport {
    pub scenarios: Vec<DominantEntry>,
}

pub fn dominant_report(scenarios: &[(&AttackTree, Option<Scenario>)]) -> DominantReport {
    DominantReport {
        scenarios: scenarios
            .iter()
            .map(|(tree, scenario)| DominantEntry {
                tree: tree.id.clone(),
                scenario: scenario.clone(),
            })
            .collect(),
    }
}

pub fn dominant_text(
    forest: &ResolvedForest,
    scenarios: &[(&AttackTree, Option<Scenario>)],
) -> String {
    let mut out = String::new();
    for (tree, scenario) in scenarios {
        out.push_str(&format!(
            "tree {} ({}, {})\n",
            tree.id, tree.asset, tree.property
        ));
        match scenario {
            None => out.push_str("  goal infeasible under the given mitigations\n"),
            Some(scenario) => {
                out.push_str(&format!("  summary: {}\n", scenario.summary));
                let path: Vec<String> = scenario.path.iter().map(ids_with_title(forest)).collect();
                out.push_str(&format!("  path: {}\n", path.join(" -> ")));
                let leaves: Vec<String> =
                    scenario.leaves.iter().map(|id| id.to_string()).collect();
                out.push_str(&format!("  leaves: {}\n", leaves.join(", ")));
            }
        }
    }
    out
}

fn ids_with_title(forest: &ResolvedForest) -> impl Fn(&NodeId) -> String + '_ {
    |id| match forest.node(id) {
        Some(node) if !id.is_root() => format!("{} ({})", id, node.title),
        _ => id.to_string(),
    }
}

// ---------------------------------------------------------------------------
// mitigate (what-if)
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct WhatIfEnvelope<'a> {
    pub reports: &'a [WhatIfReport],
}

pub fn what_if_table(reports: &[WhatIfReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let after_summary = r
                .after
                .as_ref()
                .map_or("infeasible".to_string(), |s| s.summary.to_string());
            let after_leaf = r
                .after
                .as_ref()
                .map_or("-".to_string(), |s| s.dominant_leaf().to_string());
            let locus = r
                .after_locus
                .map_or("-".to_string(), |l| l.to_string());
            vec![
                r.tree.clone(),
                r.before.summary.to_string(),
                r.before.dominant_leaf().to_string(),
                after_summary,
                after_leaf,
                locus,
            ]
        })
        .collect();
    table(
        &[
            "tree",
            "before",
            "dominant before",
            "after",
            "dominant after",
            "locus after",
        ],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

pub fn comparison_table(report: &ComparisonReport) -> String {
    let mut out = format!(
        "threshold: {} (deltas up to this magnitude are method noise); mitigations applied: {}\n",
        report.threshold,
        report.mitigations.len()
    );
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            let dominant = |leaf: &Option<risktree_core::compare::DominantLeaf>| match leaf {
                Some(leaf) => match leaf.locus {
                    Some(locus) => format!("{} ({locus})", leaf.title),
                    None => leaf.title.clone(),
                },
                None => "-".into(),
            };
            vec![
                row.key.asset.clone(),
                row.key.property.to_string(),
                triple_or(row.summary_a, "infeasible"),
                triple_or(row.summary_b, "infeasible"),
                delta_column(row.effort_delta, row.risk_delta),
                if row.significant { "yes" } else { "no" }.into(),
                dominant(&row.dominant_a),
                dominant(&row.dominant_b),
            ]
        })
        .collect();
    out.push_str(&table(
        &[
            "asset",
            "property",
            "left",
            "right",
            "delta",
            "significant",
            "left dominant",
            "right dominant",
        ],
        &rows,
    ));
    for (key, tree) in &report.only_a {
        out.push_str(&format!("only left: {key} ({tree})\n"));
    }
    for (key, tree) in &report.only_b {
        out.push_str(&format!("only right: {key} ({tree})\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// coverage
// ---------------------------------------------------------------------------

pub fn coverage_table(report: &CoverageReport) -> String {
    let mut out = format!(
        "{} required, {} covered, {} missing, {} surplus\n",
        report.covered.len() + report.missing.len(),
        report.covered.len(),
        report.missing.len(),
        report.surplus.len()
    );
    let mut rows: Vec<Vec<String>> = Vec::new();
    for pair in &report.covered {
        rows.push(vec![
            pair.key.asset.clone(),
            pair.key.property.to_string(),
            "covered".into(),
            pair.tree.clone(),
        ]);
    }
    for key in &report.missing {
        rows.push(vec![
            key.asset.clone(),
            key.property.to_string(),
            "missing".into(),
            "-".into(),
        ]);
    }
    for pair in &report.surplus {
        rows.push(vec![
            pair.key.asset.clone(),
            pair.key.property.to_string(),
            "surplus".into(),
            pair.tree.clone(),
        ]);
    }
    out.push_str(&table(&["asset", "property", "status", "tree"], &rows));
    out
}

// ---------------------------------------------------------------------------
// export
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct DotReport<'a> {
    pub tree: &'a str,
    pub dot: &'a str,
}
