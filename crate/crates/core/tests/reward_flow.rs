//! End-to-end reward tiers through the scripted simulator: parse failures
//! earn 0, simulator-rejected candidates earn 0, functionally equal
//! candidates earn 2.0, and everything parseable-but-wrong lands in
//! `0.1 + ast_score`.

#![cfg(unix)]

use std::os::unix::fs::PermissionsExt;
use std::path::Path;
use std::time::Duration;
use verigrade_core::curation::DatasetSample;
use verigrade_core::frontend::SourceText;
use verigrade_core::harness::{OutputTrace, SimulatorConfig, VerdictStatus};
use verigrade_core::reward::{score_candidate, score_group, ScoreError, SlotOutcome};
use verigrade_core::similarity::CategoryWeights;

fn write_script(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{body}")).unwrap();
    let mut perms = std::fs::metadata(&path).unwrap().permissions();
    perms.set_mode(0o755);
    std::fs::set_permissions(&path, perms).unwrap();
    path.display().to_string()
}

fn scripted_config(dir: &Path) -> SimulatorConfig {
    let compile = write_script(
        dir,
        "compile.sh",
        r#"out="$1"; shift
cat "$@" > "$out" || exit 1
if grep -q BADCOMPILE "$out"; then echo "rejected" >&2; exit 1; fi
exit 0
"#,
    );
    let run = write_script(dir, "run.sh", "sed -n 's|^//EMIT ||p' \"$1\"\nexit 0\n");
    SimulatorConfig {
        compile_command_template: format!("{compile} {{out}} {{sources}}"),
        run_command_template: format!("{run} {{binary}}"),
        timeout: Duration::from_secs(10),
        workdir_root: dir.join("work"),
        keep_failed_workdirs: false,
    }
}

const GOLDEN: &str = "module and_gate(input a, input b, output y);\n  assign y = a & b;\nendmodule\n";

fn golden_records() -> Vec<String> {
    (0..128)
        .map(|i| format!("index={i} out={}", (i & 1) & ((i >> 1) & 1)))
        .collect()
}

/// A candidate whose emitted trace is controlled by the test. The emit
/// markers ride along in comments, so the module still parses.
fn candidate(label: &str, body: &str, emits: &[String]) -> SourceText {
    let markers: Vec<String> = emits.iter().map(|l| format!("//EMIT {l}")).collect();
    SourceText::labeled(format!("{body}\n{}\n", markers.join("\n")), label)
}

fn sample(dir: &Path) -> DatasetSample {
    let _ = dir;
    DatasetSample {
        sample_id: "and-sample".to_string(),
        prompt: "2-input AND".to_string(),
        golden_code: SourceText::labeled(GOLDEN, "golden"),
        testbench: SourceText::labeled("// tb placeholder\n", "tb"),
        golden_trace: OutputTrace::from_records(golden_records()),
        reasoning: None,
    }
}

#[test]
fn functional_match_earns_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scripted_config(dir.path());
    let cand = candidate("perfect", GOLDEN, &golden_records());
    let score = score_candidate(&cand, &sample(dir.path()), &CategoryWeights::default(), &cfg)
        .unwrap();
    assert!(score.syntax_ok);
    assert_eq!(score.reward, 2.0);
    assert_eq!(score.functional.unwrap().status, VerdictStatus::Pass);
}

#[test]
fn parse_failure_earns_zero_without_simulating() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scripted_config(dir.path());
    // Even a broken simulator cannot be reached by an unparseable candidate.
    cfg.compile_command_template = "/nonexistent/tool {out} {sources}".to_string();
    let cand = SourceText::labeled("this is not verilog", "garbage");
    let score = score_candidate(&cand, &sample(dir.path()), &CategoryWeights::default(), &cfg)
        .unwrap();
    assert!(!score.syntax_ok);
    assert_eq!(score.reward, 0.0);
    assert!(score.ast_score.is_none());
    assert!(score.functional.is_none());
    assert!(score.detail.unwrap().contains("parse error"));
}

#[test]
fn simulator_rejection_earns_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scripted_config(dir.path());
    let cand = candidate(
        "frontend-ok-simulator-no",
        "module and_gate(input a, input b, output y);\n  assign y = a & b; // BADCOMPILE\nendmodule",
        &golden_records(),
    );
    let score = score_candidate(&cand, &sample(dir.path()), &CategoryWeights::default(), &cfg)
        .unwrap();
    assert!(!score.syntax_ok);
    assert_eq!(score.reward, 0.0);
    assert_eq!(
        score.functional.unwrap().status,
        VerdictStatus::CompileError
    );
}

#[test]
fn functional_mismatch_falls_back_to_structural_reward() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scripted_config(dir.path());
    let or_records: Vec<String> = (0..128)
        .map(|i| format!("index={i} out={}", (i & 1) | ((i >> 1) & 1)))
        .collect();
    let or_gate = "module and_gate(input a, input b, output y);\n  assign y = a | b;\nendmodule";
    let cand = candidate("or-instead-of-and", or_gate, &or_records);
    let score = score_candidate(&cand, &sample(dir.path()), &CategoryWeights::default(), &cfg)
        .unwrap();
    assert!(score.syntax_ok);
    assert_eq!(score.functional.as_ref().unwrap().status, VerdictStatus::Fail);
    // One flipped operator token still clamps to a structural score of 1.
    let ast = score.ast_score.unwrap();
    assert_eq!(ast, 1.0);
    assert!((score.reward - 1.1).abs() < 1e-12);
    let mm = score.functional.unwrap().first_mismatch.unwrap();
    assert_eq!(mm.index, 1); // a=1, b=0: AND=0, OR=1
}

#[test]
fn infrastructure_failure_is_an_error_not_a_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scripted_config(dir.path());
    cfg.compile_command_template = "/nonexistent/tool {out} {sources}".to_string();
    let cand = candidate("fine", GOLDEN, &golden_records());
    match score_candidate(&cand, &sample(dir.path()), &CategoryWeights::default(), &cfg) {
        Err(ScoreError::Infra(_)) => {}
        other => panic!("expected infrastructure error, got {other:?}"),
    }
}

#[test]
fn group_scoring_preserves_order_and_computes_population_stats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scripted_config(dir.path());
    let s = sample(dir.path());
    let wrong_records: Vec<String> = (0..128).map(|i| format!("index={i} out=0")).collect();
    let candidates = vec![
        candidate("c0-pass", GOLDEN, &golden_records()),
        SourceText::labeled("garbage !!", "c1-parsefail"),
        candidate(
            "c2-wrong",
            "module and_gate(input a, input b, output y);\n  assign y = a | b;\nendmodule",
            &wrong_records,
        ),
        candidate("c3-pass", GOLDEN, &golden_records()),
    ];
    for workers in [1, 4] {
        let group =
            score_group(&candidates, &s, &CategoryWeights::default(), &cfg, workers).unwrap();
        let rewards: Vec<f64> = group.slots.iter().map(|s| s.reward().unwrap()).collect();
        assert_eq!(rewards[0], 2.0);
        assert_eq!(rewards[1], 0.0);
        assert!((rewards[2] - 1.1).abs() < 1e-12);
        assert_eq!(rewards[3], 2.0);
        // μ and population σ over {2.0, 0, 1.1, 2.0}.
        let mean = group.mean.unwrap();
        let std = group.std.unwrap();
       assert!((mean - 1.275).abs() < 1e-12);
        let var = ((2.0f64 - mean).powi(2) * 2.0
            + (0.0 - mean).powi(2)
            + (1.1 - mean).powi(2))
            / 4.0;
        assert!((std - var.sqrt()).abs() < 1e-12);
        assert!(group.warnings.is_empty());
    }
}

#[test]
fn broken_simulator_invalidates_every_slot_with_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scripted_config(dir.path());
    cfg.compile_command_template = "/nonexistent/tool {out} {sources}".to_string();
    let s = sample(dir.path());
    let candidates = vec![
        candidate("a", GOLDEN, &golden_records()),
        candidate("b", GOLDEN, &golden_records()),
    ];
    let group = score_group(&candidates, &s, &CategoryWeights::default(), &cfg, 1).unwrap();
    assert!(group
        .slots
        .iter()
        .all(|s| matches!(s, SlotOutcome::Invalid { .. })));
    assert!(group.mean.is_none() && group.std.is_none());
    assert_eq!(group.warnings.len(), 2);
}

#[test]
fn single_candidate_group_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scripted_config(dir.path());
    let s = sample(dir.path());
    let one = vec![candidate("only", GOLDEN, &golden_records())];
    assert!(matches!(
        score_group(&one, &s, &CategoryWeights::default(), &cfg, 1),
        Err(ScoreError::GroupTooSmall(1))
    ));
}
