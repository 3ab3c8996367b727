//! Re-records the mini-corpus replay cache with the scripted providers.
//!
//! cargo run -p qpc-cli --example prime_minicorpus

#[path = "../tests/support/scripted.rs"]
mod scripted;

use std::path::Path;
use std::sync::Arc;

use qpc_cli::args::{AnnotateArgs, Command, GenArgs};
use qpc_cli::config::{LoadedConfig, Overrides};
use qpc_llmio::Mode;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/minicorpus");
    let cache = dir.join("cache.jsonl");
    if cache.exists() {
        std::fs::remove_file(&cache)?;
    }
    let overrides = Overrides {
        mode: Some(Mode::Record),
        ..Overrides::default()
    };
    let cfg = LoadedConfig::load(Some(&dir.join("config.json")), &overrides)?;
    let client = cfg.client(Arc::new(scripted::ScriptedTransport))?;
    let work = tempfile::tempdir()?;
    let w = work.path();
    let gen = Command::Gen(GenArgs {
        questions: dir.join("questions.jsonl"),
        store: w.join("generated"),
        requests: w.join("requests.jsonl"),
        failures: None,
        dry_run: false,
    });
    qpc_cli::run_with(gen, &cfg, Some(&client)).await?;
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
    qpc_cli::run_with(annotate, &cfg, Some(&client)).await?;
    println!(
        "recorded {} exchange(s) to {}",
        client.cache().len(),
        cache.display()
    );
    Ok(())
}
