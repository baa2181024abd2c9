//! Command-line front end: parse attack forests, propagate risk values,
//! audit recorded annotations, run mitigation what-ifs, compare designs,
//! check asset coverage and export trees for graph layout tools.
//!
//! Exit status: 0 on success, 1 when the command completed but found
//! violations, findings, missing coverage or significant differences, 2 on
//! parse and usage errors.

mod dot;
mod load;
mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use risktree_core::compare::compare;
use risktree_core::engine::{
    apply_mitigations, audit, dominant_scenario, propagate, what_if, EngineError, MitigationSet,
};
use risktree_core::validate::validate;
use risktree_core::{coverage, parse_assets, resolve_refs};

#[derive(Parser)]
#[command(
    name = "risktree",
    version,
    about = "Attack-tree risk analysis over annotated AND/OR forests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum Format {
    #[default]
    Text,
    Structured,
}

#[derive(clap::Args)]
struct OutputOpts {
    /// Output format: human-readable text or a versioned JSON envelope.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report to a file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a forest file for structural problems.
    Validate {
        /// Forest file (`.atk` outline or `.atk.json` canonical form).
        input: PathBuf,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Propagate risk values bottom-up and show computed node values.
    Eval {
        input: PathBuf,
        /// Restrict the report to one tree, with per-node detail.
        #[arg(long)]
        tree: Option<String>,
        /// Mitigation-set file (may be given several times).
        #[arg(long = "mitigate")]
        mitigate: Vec<PathBuf>,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Compare analyst-recorded values against mechanical propagation.
    Audit {
        input: PathBuf,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Show the dominant attack scenario per goal.
    Dominant {
        input: PathBuf,
        #[arg(long)]
        tree: Option<String>,
        #[arg(long = "mitigate")]
        mitigate: Vec<PathBuf>,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Evaluate a what-if mitigation: dominant risk before and after.
    Mitigate {
        input: PathBuf,
        #[arg(long)]
        tree: Option<String>,
        /// Mitigation-set file (required; may be given several times).
        #[arg(long = "mitigate", required = true)]
        mitigate: Vec<PathBuf>,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Compare two designs' forests goal by goal.
    Compare {
        left: PathBuf,
        right: PathBuf,
        #[arg(long = "mitigate")]
        mitigate: Vec<PathBuf>,
        /// Component deltas up to this magnitude count as method noise.
        #[arg(long, default_value_t = 1)]
        threshold: u16,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Check an asset catalog against a forest's goal coverage.
    Coverage {
        /// Asset catalog (`.assets`).
        assets: PathBuf,
        forest: PathBuf,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Export one tree as a DOT graph.
    Export {
        input: PathBuf,
        /// Tree to export.
        #[arg(long)]
        tree: String,
        #[arg(long = "mitigate")]
        mitigate: Vec<PathBuf>,
        #[command(flatten)]
        output: OutputOpts,
    },
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    version: u32,
    report: T,
}

fn structured<T: Serialize>(report: &T) -> String {
    let mut text = serde_json::to_string_pretty(&Envelope {
        version: 1,
        report,
    })
    .expect("reports serialize");
    text.push('\n');
    text
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Validate { input, output } => cmd_validate(&input, output),
        Command::Eval {
            input,
            tree,
            mitigate,
            output,
        } => cmd_eval(&input, tree.as_deref(), &mitigate, output),
        Command::Audit { input, output } => cmd_audit(&input, output),
        Command::Dominant {
            input,
            tree,
            mitigate,
            output,
        } => cmd_dominant(&input, tree.as_deref(), &mitigate, output),
        Command::Mitigate {
            input,
            tree,
            mitigate,
            output,
        } => cmd_mitigate(&input, tree.as_deref(), &mitigate, output),
        Command::Compare {
            left,
            right,
            mitigate,
            threshold,
            output,
        } => cmd_compare(&left, &right, &mitigate, threshold, output),
        Command::Coverage {
            assets,
            forest,
            output,
        } => cmd_coverage(&assets, &forest, output),
        Command::Export {
            input,
            tree,
            mitigate,
            output,
        } => cmd_export(&input, &tree, &mitigate, output),
    }
}

fn emit(text: String, output: &OutputOpts) -> Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Load, validate and resolve a forest for evaluation; structural problems
/// are input errors for evaluating commands.
fn evaluable(path: &Path) -> Result<risktree_core::ResolvedForest> {
    let forest = load::forest(path)?;
    let violations = validate(&forest);
    if !violations.is_empty() {
        for violation in &violations {
            eprintln!("{violation}");
        }
        bail!(
            "{}: {} validation problem(s); run `risktree validate` for a report",
            path.display(),
            violations.len()
        );
    }
    resolve_refs(forest).with_context(|| format!("resolving {}", path.display()))
}

fn mitigations_from(paths: &[PathBuf]) -> Result<MitigationSet> {
    let mut set = MitigationSet::default();
    for path in paths {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let parsed = MitigationSet::parse(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        set = set.union(&parsed);
    }
    Ok(set)
}

fn tree_selection<'f>(
    forest: &'f risktree_core::Forest,
    tree: Option<&str>,
) -> Result<Vec<&'f risktree_core::AttackTree>> {
    match tree {
        Some(id) => match forest.tree(id) {
            Some(tree) => Ok(vec![tree]),
            None => bail!("{}", EngineError::UnknownTree(id.to_string())),
        },
        None => Ok(forest.trees().collect()),
    }
}

fn cmd_validate(input: &Path, output: OutputOpts) -> Result<u8> {
    let forest = load::forest(input)?;
    let violations = validate(&forest);
    let resolution = resolve_refs(forest.clone()).err();
    let report = render::ValidationReport::new(input, &forest, violations, resolution);

    let text = match output.format {
        Format::Text => report.to_text(),
        Format::Structured => structured(&report),
    };
    emit(text, &output)?;
    Ok(if report.clean() { 0 } else { 1 })
}

fn cmd_eval(
    input: &Path,
    tree: Option<&str>,
    mitigate: &[PathBuf],
    output: OutputOpts,
) -> Result<u8> {
    let resolved = evaluable(input)?;
    let mitigated = apply_mitigations(&resolved, &mitigations_from(mitigate)?)?;
    let evaluation = propagate(&mitigated)?;
    let trees = tree_selection(mitigated.forest(), tree)?;

    let text = match (tree, output.format) {
        (Some(_), Format::Text) => render::eval_tree_detail(trees[0], &evaluation),
        (None, Format::Text) => render::eval_summary(&trees, &evaluation),
        (Some(_), Format::Structured) => {
            structured(&render::eval_nodes_report(trees[0], &evaluation))
        }
        (None, Format::Structured) => structured(&render::eval_report(&trees, &evaluation)),
    };
    emit(text, &output)?;
    Ok(0)
}

fn cmd_audit(input: &Path, output: OutputOpts) -> Result<u8> {
    let resolved = evaluable(input)?;
    let findings = audit(&resolved)?;
    let text = match output.format {
        Format::Text => render::audit_table(&findings),
        Format::Structured => structured(&render::AuditReport {
            findings: &findings,
        }),
    };
    emit(text, &output)?;
    Ok(if findings.is_empty() { 0 } else { 1 })
}

fn cmd_dominant(
    input: &Path,
    tree: Option<&str>,
    mitigate: &[PathBuf],
    output: OutputOpts,
) -> Result<u8> {
    let resolved = evaluable(input)?;
    let mitigated = apply_mitigations(&resolved, &mitigations_from(mitigate)?)?;
    let trees = tree_selection(mitigated.forest(), tree)?;

    let mut scenarios = Vec::new();
    for tree in &trees {
        let scenario = match dominant_scenario(&mitigated, &tree.id) {
            Ok(scenario) => Some(scenario),
            Err(EngineError::InfeasibleGoal(_)) => None,
            Err(other) => return Err(other.into()),
        };
        scenarios.push((*tree, scenario));
    }

    let text = match output.format {
        Format::Text => render::dominant_text(&mitigated, &scenarios),
        Format::Structured => structured(&render::dominant_report(&scenarios)),
    };
    emit(text, &output)?;
    Ok(0)
}

fn cmd_mitigate(
    input: &Path,
    tree: Option<&str>,
    mitigate: &[PathBuf],
    output: OutputOpts,
) -> Result<u8> {
    let resolved = evaluable(input)?;
    let set = mitigations_from(mitigate)?;
    let trees = tree_selection(resolved.forest(), tree)?;

    let mut reports = Vec::new();
    for tree in &trees {
        reports.push(what_if(&resolved, &tree.id, &set)?);
    }

    let text = match output.format {
        Format::Text => render::what_if_table(&reports),
        Format::Structured => structured(&render::WhatIfEnvelope { reports: &reports }),
    };
    emit(text, &output)?;
    Ok(0)
}

fn cmd_compare(
    left: &Path,
    right: &Path,
    mitigate: &[PathBuf],
    threshold: u16,
    output: OutputOpts,
) -> Result<u8> {
    let forest_a = load::forest(left)?;
    let forest_b = load::forest(right)?;
    for (path, forest) in [(left, &forest_a), (right, &forest_b)] {
        let violations = validate(forest);
        if !violations.is_empty() {
            bail!(
                "{}: {} validation problem(s); run `risktree validate`",
                path.display(),
                violations.len()
            );
        }
    }
    let report = compare(&forest_a, &forest_b, &mitigations_from(mitigate)?, threshold)?;

    let text = match output.format {
        Format::Text => render::comparison_table(&report),
        Format::Structured => structured(&report),
    };
    emit(text, &output)?;
    Ok(if report.any_significant() { 1 } else { 0 })
}

fn cmd_coverage(assets: &Path, forest_path: &Path, output: OutputOpts) -> Result<u8> {
    let catalog_text = std::fs::read_to_string(assets)
        .with_context(|| format!("reading {}", assets.display()))?;
    let catalog = parse_assets(&catalog_text)
        .with_context(|| format!("parsing {}", assets.display()))?;
    let forest = load::forest(forest_path)?;
    let report = coverage(&catalog, &forest);

    let text = match output.format {
        Format::Text => render::coverage_table(&report),
        Format::Structured => structured(&report),
    };
    emit(text, &output)?;
    Ok(if report.is_complete() { 0 } else { 1 })
}

fn cmd_export(
    input: &Path,
    tree: &str,
    mitigate: &[PathBuf],
    output: OutputOpts,
) -> Result<u8> {
    let resolved = evaluable(input)?;
    let mitigated = apply_mitigations(&resolved, &mitigations_from(mitigate)?)?;
    let evaluation = propagate(&mitigated)?;
    let graph = dot::export_dot(&mitigated, tree, &evaluation)?;

    let text = match output.format {
        Format::Text => graph,
        Format::Structured => structured(&render::DotReport { tree, dot: &graph }),
    };
    emit(text, &output)?;
    Ok(0)
}
