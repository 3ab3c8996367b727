mod support;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use qpc_cli::args::{AnnotateArgs, Command, GenArgs};
use qpc_cli::config::{LoadedConfig, Overrides};
use qpc_llmio::{ExchangeRecord, Mode};

fn responses(path: &Path) -> BTreeMap<String, String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let r: ExchangeRecord = serde_json::from_str(l).unwrap();
            (r.request_hash, r.response)
        })
        .collect()
}

#[tokio::test]
async fn rerecording_reproduces_the_committed_cache() {
    let dir = support::fixture_dir();
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let overrides = Overrides {
        mode: Some(Mode::Record),
        cache_path: Some(w.join("cache.jsonl")),
        ..Overrides::default()
    };
    let cfg = LoadedConfig::load(Some(&dir.join("config.json")), &overrides).unwrap();
    let client = cfg
        .client(Arc::new(support::scripted::ScriptedTransport))
        .unwrap();
    let gen = Command::Gen(GenArgs {
        questions: dir.join("questions.jsonl"),
        store: w.join("generated"),
        requests: w.join("requests.jsonl"),
        failures: None,
        dry_run: false,
    });
    qpc_cli::run_with(gen, &cfg, Some(&client)).await.unwrap();
    let annotate = Command::Annotate(AnnotateArgs {
        questions: dir.join("questions.jsonl"),
        store: w.join("generated"),
        out_store: w.join("annotated"),
        verdicts: w.join("verdicts.jsonl"),
        policy: None,
        schedule: None,
        verdicts_in: None,
        failures: None,
    });
    qpc_cli::run_with(annotate, &cfg, Some(&client))
        .await
        .unwrap();
    drop(client);
    assert_eq!(
        responses(&w.join("cache.jsonl")),
        responses(&dir.join("cache.jsonl"))
    );
}
