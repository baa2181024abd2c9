//! Spot checks of the shipped fixtures against hand-verified values.

mod common;

use common::*;
use risktree_core::canonical::emit_canonical;
use risktree_core::compare::match_goals;
use risktree_core::engine::{audit, dominant_scenario, propagate, MitigationSet};
use risktree_core::resolve::resolve_refs;
use risktree_core::validate::validate;

#[test]
fn fixtures_parse_validate_and_resolve() {
    for name in ["layered.atk", "soa.atk"] {
        let forest = fixture_forest(name);
        assert_eq!(forest.len(), 13, "{name} holds thirteen trees");
        assert!(validate(&forest).is_empty(), "{name} validates cleanly");
        resolve_refs(forest).unwrap_or_else(|e| panic!("{name} resolves: {e}"));
    }
}

#[test]
fn shared_subtree_value_flows_through_reference() {
    // "Direct access to the database" is shared; the borrowing tree's node
    // takes the target's computed effort and risk with its own gain.
    let forest = resolve_refs(fixture_forest("layered.atk")).unwrap();
    let evaluation = propagate(&forest).unwrap();
    let borrowed = evaluation.triple(&node_id("C.2.1:1")).unwrap();
    assert_eq!(borrowed.to_string(), "5/2/7");
    let target = evaluation.triple(&node_id("C.1.1:1")).unwrap();
    assert_eq!((target.effort, target.risk), (borrowed.effort, borrowed.risk));
}

#[test]
fn hand_checked_inner_values() {
    let forest = resolve_refs(fixture_forest("layered.atk")).unwrap();
    let evaluation = propagate(&forest).unwrap();

    // OR over five options: the cheap low-risk one wins.
    let v = evaluation.triple(&node_id("C.1.1:4.3.3")).unwrap();
    assert_eq!((v.effort, v.risk), (2, 1));

    // AND bottleneck on both axes.
    let v = evaluation.triple(&node_id("C.2.2:3")).unwrap();
    assert_eq!((v.effort, v.risk), (8, 2));

    // AND whose non-assumption children dominate; the assumption child
    // carries no value at all.
    let v = evaluation.triple(&node_id("C.1.1:2")).unwrap();
    assert_eq!((v.effort, v.risk), (8, 2));

    // Deep AND below an OR chain.
    let v = evaluation.triple(&node_id("C.1.1:4.3.3.4")).unwrap();
    assert_eq!((v.effort, v.risk), (4, 2));
}

#[test]
fn unmitigated_dominant_scenario_of_credential_confidentiality() {
    let forest = resolve_refs(fixture_forest("layered.atk")).unwrap();
    let scenario = dominant_scenario(&forest, "C.2.2").unwrap();
    assert_eq!(scenario.summary.to_string(), "2/1/7");
    // Deceiving the user is the cheapest option; the path descends into
    // item 2 and stops at the AND group.
    assert!(scenario.path_contains(&node_id("C.2.2:2")));
    assert!(scenario.leaves.contains(&node_id("C.2.2:2.1")));
    assert!(scenario.leaves.contains(&node_id("C.2.2:2.2")));
}

#[test]
fn audit_is_stable_and_spares_leaves() {
    let forest = resolve_refs(fixture_forest("layered.atk")).unwrap();
    let findings = audit(&forest).unwrap();
    assert_eq!(findings, audit(&forest).unwrap());
    // Findings only ever point at derived values.
    for finding in &findings {
        let node = forest.node(&finding.node).unwrap();
        assert!(!node.children.is_empty() || node.reference.is_some());
    }
    // The unverified availability roots never show up.
    assert!(findings.iter().all(|f| f.node.tree != "C.5.2"));
}

#[test]
fn goal_matching_across_designs() {
    let layered = fixture_forest("layered.atk");
    let soa = fixture_forest("soa.atk");
    let matching = match_goals(&layered, &soa).unwrap();
    assert_eq!(matching.matched.len(), 13);
    assert!(matching.only_a.is_empty());
    assert!(matching.only_b.is_empty());

    let wot = matching
        .matched
        .iter()
        .find(|m| m.key.asset == "web-of-trust" && m.key.property.as_str() == "integrity")
        .unwrap();
    assert_eq!(wot.tree_a, "C.1.1");
    assert_eq!(wot.tree_b, "E.1.1");
}

#[test]
fn canonical_form_spells_out_recorded_values() {
    let forest = fixture_forest("layered.atk");
    let text = emit_canonical(&forest);
    // Hijacking the authentication state: effort 4, risk 2, gain 5.
    let at = text
        .find("\"title\": \"Hijack authentication state of the user\"")
        .expect("node present in canonical text");
    let vicinity = &text[at..at + 400];
    for field in ["\"effort\": 4", "\"risk\": 2", "\"gain\": 5"] {
        assert!(vicinity.contains(field), "missing {field} near the node");
    }
}

#[test]
fn mitigation_fixture_files_parse() {
    for name in [
        "mitigations/credential-theft-layered.txt",
        "mitigations/credential-theft-soa.txt",
    ] {
        let set = MitigationSet::parse(&fixture_text(name)).unwrap();
        assert_eq!(set.len(), 8, "{name} lists eight nodes");
    }
}
