mod support;

use qpc_core::gate::GateDecision;
use qpc_core::{LabelProvenance, Split};
use support::pipeline::{run_pipeline, scripted_labels};
use support::{qpc, qpc_ok};

#[test]
fn scripted_rates_track_running_agreement() {
    let silver = vec![qpc_core::Label::True; 10];
    let agree = |rate| {
        scripted_labels(&silver, rate)
            .iter()
            .filter(|l| l.as_bool())
            .count()
    };
    assert_eq!(agree(0.95), 10);
    assert_eq!(agree(0.60), 6);
    let prefix = scripted_labels(&silver[..4], 0.60);
    assert_eq!(prefix.iter().filter(|l| l.as_bool()).count(), 3);
}

#[test]
fn replayed_pipeline_is_deterministic_and_disjoint() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_pipeline(a.path());
    let second = run_pipeline(b.path());

    let out = qpc_ok(&[
        "replay",
        "verify",
        &first.digests.to_string_lossy(),
        &second.digests.to_string_lossy(),
    ]);
    assert!(out.contains("byte-identical"), "{out}");

    assert_eq!(first.question_overlap(), 0);
    for key in [
        "olympiadbench/model-a/proof",
        "olympiadbench/model-a/mask_completion",
    ] {
        assert_eq!(first.decision(key), GateDecision::Accepted, "{key}");
    }
    for key in [
        "olympiadbench/model-b/proof",
        "olympiadbench/model-b/mask_completion",
    ] {
        assert_eq!(first.decision(key), GateDecision::Dropped, "{key}");
    }
    let test: Vec<_> = first
        .split
        .iter()
        .filter(|i| i.split == Split::Test)
        .collect();
    assert!(!test.is_empty());
    assert!(test
        .iter()
        .all(|i| i.label_provenance == LabelProvenance::Human));
    let train_models: std::collections::BTreeSet<_> = first
        .split
        .iter()
        .filter(|i| i.split == Split::Train && i.label_provenance == LabelProvenance::LlmSilver)
        .map(|i| i.combination.canonical())
        .collect();
    assert!(
        train_models.iter().all(|k| k.contains("/model-a/")),
        "{train_models:?}"
    );
}

#[test]
fn changed_output_fails_verification() {
    let a = tempfile::tempdir().unwrap();
    let run = run_pipeline(a.path());
    let copy = a.path().join("copy");
    std::fs::create_dir_all(&copy).unwrap();
    std::fs::write(copy.join("extra.jsonl"), "{}\n").unwrap();
    let out = qpc(&[
        "replay",
        "verify",
        &run.dir.to_string_lossy(),
        &copy.to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(8));
}

#[test]
fn replay_without_cache_entry_reports_llm_error() {
    let dir = tempfile::tempdir().unwrap();
    let fx = support::fixture_dir();
    let empty_cache = dir.path().join("empty.jsonl");
    std::fs::write(&empty_cache, "").unwrap();
    let out = qpc(&[
        "gen",
        "--config",
        &fx.join("config.json").to_string_lossy(),
        "--cache",
        &empty_cache.to_string_lossy(),
        "--questions",
        &fx.join("questions.jsonl").to_string_lossy(),
        "--store",
        &dir.path().join("store").to_string_lossy(),
        "--requests",
        &dir.path().join("requests.jsonl").to_string_lossy(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(5),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("requests.failures.jsonl").exists());
}
