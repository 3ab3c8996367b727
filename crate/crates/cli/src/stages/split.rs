use qpc_core::gate::{finalize_split, GateState, SplitOutcome};
use qpc_core::{JsonlStore, Split};
use serde_json::json;

use super::gate::GateView;
use super::read_json;
use crate::args::SplitArgs;
use crate::config::LoadedConfig;
use crate::error::Result;
use crate::runlog::RunLog;

pub fn run(cfg: &LoadedConfig, args: &SplitArgs) -> Result<SplitOutcome> {
    let mut log = RunLog::new("split", cfg);
    for p in [
        &args.inputs.store,
        &args.inputs.plan,
        &args.inputs.judgments,
        &args.gate,
    ] {
        log.input(p)?;
    }
    let view = GateView::load(&args.inputs)?;
    let states: Vec<GateState> = read_json(&args.gate)?;
    let outcome = finalize_split(&view.items, &view.plan, &states, &view.log.human_labels())?;
    let store = JsonlStore::create_fresh(&args.out_store)?;
    store.append_batch(outcome.items.clone())?;
    log.output(&args.out_store)?;
    let count = |s: Split| outcome.items.iter().filter(|i| i.split == s).count();
    if !outcome.pending_test_labels.is_empty() {
        tracing::warn!(
            count = outcome.pending_test_labels.len(),
            "sampled items still lack a human label and stay unassigned"
        );
    }
    log.summary(json!({
        "train": count(Split::Train),
        "test": count(Split::Test),
        "unassigned": count(Split::Unassigned),
        "pending_test_labels": outcome.pending_test_labels.len(),
    }));
    log.finish(&args.out_store)?;
    Ok(outcome)
}
