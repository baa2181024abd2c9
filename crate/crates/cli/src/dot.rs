//! DOT export of a single tree, suitable for graphviz and friends.
//!
//! Each node is labelled `outline\ntitle\nE/R/G` (the tree id stands in for
//! the root's empty outline). AND groups carry one `AND` annotation on the
//! edge to their first child. Infeasible nodes render dashed and grey,
//! explicitly mitigated ones additionally filled. Cross-references into the
//! same tree become dashed edges; targets in other trees are named in the
//! node label.

use risktree_core::engine::{EngineError, Evaluation, NodeValue};
use risktree_core::model::{AttackNode, Combinator};
use risktree_core::resolve::ResolvedForest;

pub fn export_dot(
    forest: &ResolvedForest,
    tree_id: &str,
    evaluation: &Evaluation,
) -> Result<String, EngineError> {
    let tree = forest
        .tree(tree_id)
        .ok_or_else(|| EngineError::UnknownTree(tree_id.to_string()))?;

    let mut out = String::new();
    out.push_str(&format!("digraph \"{}\" {{\n", escape(tree_id)));
    out.push_str("  rankdir=TB;\n");
    out.push_str("  node [shape=box];\n");
    emit_node(&mut out, forest, evaluation, &tree.root, tree_id);
    out.push_str("}\n");
    Ok(out)
}

fn emit_node(
    out: &mut String,
    forest: &ResolvedForest,
    evaluation: &Evaluation,
    node: &AttackNode,
    tree_id: &str,
) {
    let heading = if node.id.is_root() {
        tree_id.to_string()
    } else {
        node.id.outline.to_string()
    };
    let value = match evaluation.value(&node.id) {
        Some(NodeValue::Feasible { value, .. }) => value.to_string(),
        Some(NodeValue::Infeasible) => "infeasible".into(),
        Some(NodeValue::Excluded) => "assumption".into(),
        None => "-".into(),
    };
    let mut label = format!(
        "{}\\n{}\\n{}",
        escape(&heading),
        escape(&node.title),
        escape(&value)
    );
    if let Some(target) = &node.reference {
        label.push_str(&format!("\\nsee {}", escape(&target.to_string())));
    }

    let infeasible = matches!(evaluation.value(&node.id), Some(NodeValue::Infeasible));
    let style = if forest.is_mitigated(&node.id) {
        " style=\"dashed,filled\" fillcolor=lightgray color=gray"
    } else if infeasible {
        " style=dashed color=gray"
    } else {
        ""
    };
    out.push_str(&format!("  \"{}\" [label=\"{label}\"{style}];\n", escape_id(node)));

    for (index, child) in node.children.iter().enumerate() {
        let annotation = if node.combinator == Combinator::And && index == 0 {
            " [label=\"AND\"]"
        } else {
            ""
        };
        out.push_str(&format!(
            "  \"{}\" -> \"{}\"{annotation};\n",
            escape_id(node),
            escape_id(child)
        ));
        emit_node(out, forest, evaluation, child, tree_id);
    }

    // Same-tree reference targets are drawn; cross-tree ones only named.
    if let Some(target) = &node.reference {
        if target.tree == tree_id {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [style=dashed];\n",
                escape_id(node),
                escape(&target.to_string())
            ));
        }
    }
}

fn escape_id(node: &AttackNode) -> String {
    escape(&node.id.to_string())
}

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}
