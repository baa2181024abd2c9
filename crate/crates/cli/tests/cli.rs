//! End-to-end runs of the binary against the shipped fixtures, pinning the
//! exit-status contract: 0 success, 1 findings, 2 bad input or usage.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risktree"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

#[test]
fn eval_prints_computed_root_and_exits_zero() {
    let output = run(&["eval", &fixture("layered.atk"), "--tree", "C.1.1"]);
    assert_eq!(code(&output), 0);
    assert!(stdout(&output).contains("2/1/8"));
}

#[test]
fn audit_reports_known_deviation_and_exits_one() {
    let output = run(&["audit", &fixture("layered.atk")]);
    assert_eq!(code(&output), 1);
    let text = stdout(&output);
    assert!(text.contains("C.1.1:4.1"));
    assert!(text.contains("effort +1"));
    assert!(!text.contains("C.7.1"));
}

#[test]
fn validate_empty_file_notes_no_trees() {
    let path = std::env::temp_dir().join("risktree-empty.atk");
    std::fs::write(&path, "# nothing\n").unwrap();
    let output = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&output), 0);
    assert!(stdout(&output).contains("no trees found"));
}

#[test]
fn validate_flags_violations_with_exit_one() {
    let path = std::env::temp_dir().join("risktree-unannotated.atk");
    std::fs::write(
        &path,
        "tree: T\nasset: a\nproperty: integrity\ngoal: G [1/1/1]\n1. bare attack\n",
    )
    .unwrap();
    let output = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&output), 1);
    assert!(stdout(&output).contains("unannotated-leaf"));
}

#[test]
fn parse_errors_exit_two_with_span() {
    let path = std::env::temp_dir().join("risktree-bad-triple.atk");
    std::fs::write(
        &path,
        "tree: T\nasset: a\nproperty: integrity\ngoal: G\n1. attack [0/5/5]\n",
    )
    .unwrap();
    let output = run(&["eval", path.to_str().unwrap()]);
    assert_eq!(code(&output), 2);
    let err = String::from_utf8_lossy(&output.stderr).into_owned();
    assert!(err.contains("bad-triple"), "stderr was: {err}");
    assert!(err.contains(":5:"), "span names line 5: {err}");
}

#[test]
fn usage_errors_exit_two() {
    let output = run(&["eval", "--no-such-flag"]);
    assert_eq!(code(&output), 2);

    let output = run(&["eval", &fixture("layered.atk"), "--tree", "Z.9"]);
    assert_eq!(code(&output), 2);

    let output = run(&["eval", "/no/such/file.atk"]);
    assert_eq!(code(&output), 2);
}

#[test]
fn export_carries_exactly_one_and_annotation_for_two_child_and_root() {
    let output = run(&["export", &fixture("layered.atk"), "--tree", "C.7.1"]);
    assert_eq!(code(&output), 0);
    let text = stdout(&output);
    assert_eq!(text.matches("label=\"AND\"").count(), 1);
    assert!(text.starts_with("digraph \"C.7.1\""));
}

#[test]
fn export_of_reference_only_tree_is_a_single_node() {
    let output = run(&["export", &fixture("layered.atk"), "--tree", "C.3.1"]);
    assert_eq!(code(&output), 0);
    let text = stdout(&output);
    assert_eq!(text.matches("label=").count(), 1, "one graph node:\n{text}");
    assert!(text.contains("see C.1.1"));
}

#[test]
fn export_styles_everything_infeasible_when_all_leaves_mitigated() {
    let tree = std::env::temp_dir().join("risktree-two-leaf.atk");
    std::fs::write(
        &tree,
        "tree: T\nasset: a\nproperty: integrity\ngoal: G\n1. first [2/2/2]\n2. second [3/3/3]\n",
    )
    .unwrap();
    let m = std::env::temp_dir().join("risktree-two-leaf.mitigations");
    std::fs::write(&m, "T:1\nT:2\n").unwrap();
    let output = run(&[
        "export",
        tree.to_str().unwrap(),
        "--tree",
        "T",
        "--mitigate",
        m.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);
    let text = stdout(&output);
    for node in ["\"T\"", "\"T:1\"", "\"T:2\""] {
        let line = text
            .lines()
            .find(|l| l.trim_start().starts_with(node) && l.contains("label="))
            .unwrap_or_else(|| panic!("node {node} present"));
        assert!(line.contains("dashed"), "{node} styled infeasible: {line}");
    }
}

#[test]
fn compare_is_byte_deterministic() {
    let args = [
        "compare",
        &fixture("layered.atk"),
        &fixture("soa.atk"),
        "--mitigate",
        &fixture("mitigations/credential-theft-layered.txt"),
        "--mitigate",
        &fixture("mitigations/credential-theft-soa.txt"),
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0, "one-point deltas are not significant");
    assert_eq!(first.stdout, second.stdout);
    assert!(stdout(&first).contains("| web-of-trust | integrity | 4/2/8 | 4/1/8 | risk -1 | no |"));
}

#[test]
fn compare_flags_significance_at_threshold_zero() {
    let output = run(&[
        "compare",
        &fixture("layered.atk"),
        &fixture("soa.atk"),
        "--mitigate",
        &fixture("mitigations/credential-theft-layered.txt"),
        "--mitigate",
        &fixture("mitigations/credential-theft-soa.txt"),
        "--threshold",
        "0",
    ]);
    assert_eq!(code(&output), 1, "one-point deltas exceed a zero threshold");
}

#[test]
fn structured_reports_use_versioned_envelope() {
    let output = run(&[
        "coverage",
        &fixture("cacert.assets"),
        &fixture("layered.atk"),
        "--format",
        "structured",
    ]);
    assert_eq!(code(&output), 0);
    let value: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(value["version"], 1);
    assert_eq!(value["report"]["covered"].as_array().unwrap().len(), 13);
    assert_eq!(value["report"]["missing"].as_array().unwrap().len(), 0);
}

#[test]
fn out_flag_writes_file_and_prints_nothing() {
    let out = std::env::temp_dir().join("risktree-out.md");
    let output = run(&[
        "eval",
        &fixture("soa.atk"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);
    assert!(stdout(&output).is_empty());
    let written = std::fs::read_to_string(&out).unwrap();
    assert!(written.contains("E.1.1"));
}

#[test]
fn canonical_json_input_is_accepted() {
    let forest = risktree_core::outline::parse_outline(
        &std::fs::read_to_string(fixture("layered.atk")).unwrap(),
        "layered.atk",
    )
    .unwrap()
    .forest;
    let path = std::env::temp_dir().join("risktree-layered.atk.json");
    std::fs::write(&path, risktree_core::canonical::emit_canonical(&forest)).unwrap();

    let from_json = run(&["eval", path.to_str().unwrap()]);
    let from_outline = run(&["eval", &fixture("layered.atk")]);
    assert_eq!(code(&from_json), 0);
    assert_eq!(from_json.stdout, from_outline.stdout);
}

#[test]
fn mitigate_reports_infeasible_goal() {
    let tree = std::env::temp_dir().join("risktree-doomed.atk");
    std::fs::write(
        &tree,
        "tree: T\nasset: a\nproperty: integrity\ngoal: G\n1. only way [2/2/2]\n",
    )
    .unwrap();
    let m = std::env::temp_dir().join("risktree-doomed.mitigations");
    std::fs::write(&m, "T:1\n").unwrap();
    let output = run(&[
        "mitigate",
        tree.to_str().unwrap(),
        "--mitigate",
        m.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);
    assert!(stdout(&output).contains("infeasible"));
}
