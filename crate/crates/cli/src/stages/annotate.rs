use std::collections::BTreeMap;

use futures::stream::{self, StreamExt};
use qpc_core::store::read_store;
use qpc_core::verifier::{
    apply_consistency, apply_decision, Decision, Ensemble, Schedule, VerdictSet, VerifierError,
};
use qpc_core::{JsonlStore, LabelProvenance, Method, QpcItem};
use qpc_llmio::Completion;
use serde::Serialize;
use serde_json::json;

use super::gen::GenFailure;
use super::{read_questions, read_records, write_records};
use crate::args::AnnotateArgs;
use crate::config::LoadedConfig;
use crate::error::{CliError, Result};
use crate::runlog::RunLog;

#[derive(Debug, Default, Serialize)]
pub struct AnnotateSummary {
    pub items: usize,
    pub annotated: usize,
    pub reused: usize,
    pub labeled_true: usize,
    pub labeled_false: usize,
    pub dropped: usize,
    pub failed: usize,
}

/// Items the verifier ensemble labels: unlabeled LLM generations.
pub fn needs_verdict(item: &QpcItem) -> bool {
    item.label_provenance == LabelProvenance::Unlabeled
        && matches!(
            item.combination.method,
            Method::Proof | Method::Rephrase | Method::MaskCompletion | Method::Solution
        )
}

pub async fn run(
    cfg: &LoadedConfig,
    args: &AnnotateArgs,
    client: Option<&dyn Completion>,
) -> Result<AnnotateSummary> {
    let mut log = RunLog::new("annotate", cfg);
    log.input(&args.questions)?;
    log.input(&args.store)?;
    let policy = match &args.policy {
        Some(p) => p
            .parse()
            .map_err(|e: VerifierError| CliError::Config(e.to_string()))?,
        None => cfg.policy()?,
    };
    let schedule: Schedule = match &args.schedule {
        Some(s) => s
            .parse()
            .map_err(|e: VerifierError| CliError::Config(e.to_string()))?,
        None => cfg.config.verifier.schedule.clone(),
    };
    policy
        .validate(schedule.total())
        .map_err(|e| CliError::Config(e.to_string()))?;

    let questions = read_questions(&args.questions)?;
    let items = read_store(&args.store)?;
    let mut reused: BTreeMap<String, VerdictSet> = BTreeMap::new();
    if let Some(path) = &args.verdicts_in {
        log.input(path)?;
        for vs in read_records::<VerdictSet>(path)? {
            reused.insert(vs.item_id.clone(), vs);
        }
    }
    let ensemble = Ensemble {
        schedule: schedule.clone(),
        templates: cfg.templates()?,
        params: cfg.config.verifier.params.clone(),
        ..Ensemble::default()
    };

    let mut summary = AnnotateSummary {
        items: items.len(),
        ..AnnotateSummary::default()
    };
    let todo: Vec<&QpcItem> = items.iter().filter(|i| needs_verdict(i)).collect();
    let fresh: Vec<&QpcItem> = todo
        .iter()
        .copied()
        .filter(|i| {
            !reused
                .get(&i.item_id)
                .is_some_and(|vs| vs.schedule == schedule)
        })
        .collect();
    summary.reused = todo.len() - fresh.len();
    if !fresh.is_empty() {
        cfg.require_providers(schedule.0.keys().cloned())?;
    }
    let client = match (fresh.is_empty(), client) {
        (true, _) => None,
        (false, Some(c)) => Some(c),
        (false, None) => return Err(CliError::Config("annotate needs an LLM client".into())),
    };

    let mut outcomes: BTreeMap<String, std::result::Result<VerdictSet, VerifierError>> =
        BTreeMap::new();
    if let Some(client) = client {
        let results: Vec<_> = stream::iter(fresh.iter().map(|item| {
            let ensemble = &ensemble;
            let statement = questions
                .get(&item.question_id)
                .map(|q| q.statement.as_str())
                .unwrap_or_default();
            async move {
                (
                    item.item_id.clone(),
                    ensemble.run(client, statement, item).await,
                )
            }
        }))
        .buffered(cfg.config.verifier.parallel_items.max(1))
        .collect()
        .await;
        outcomes.extend(results);
    }

    let mut sets = Vec::new();
    let mut failures = Vec::new();
    let mut out_items = Vec::with_capacity(items.len());
    for item in &items {
        if !needs_verdict(item) {
            out_items.push(item.clone());
            continue;
        }
        let result = match outcomes.remove(&item.item_id) {
            Some(r) => r,
            None => Ok(reused[&item.item_id].clone()),
        };
        let labeled = match result.and_then(|vs| {
            let decision = apply_consistency(&vs, policy);
            sets.push(vs);
            decision
        }) {
            Ok(decision) => {
                summary.annotated += 1;
                match (decision, apply_decision(item, decision)) {
                    (Decision::Keep(l), Some(labeled)) => {
                        if l.as_bool() {
                            summary.labeled_true += 1;
                        } else {
                            summary.labeled_false += 1;
                        }
                        labeled
                    }
                    _ => {
                        summary.dropped += 1;
                        item.clone()
                    }
                }
            }
            Err(e) => {
                failures.push(GenFailure {
                    request_id: item.item_id.clone(),
                    provider_id: "verifier".into(),
                    error: e.to_string(),
                });
                item.clone()
            }
        };
        out_items.push(labeled);
    }

    write_records(&args.verdicts, &sets)?;
    log.output(&args.verdicts)?;
    let store = JsonlStore::create_fresh(&args.out_store)?;
    store.append_batch(out_items)?;
    log.output(&args.out_store)?;
    summary.failed = failures.len();
    if !failures.is_empty() {
        let path = args
            .failures
            .clone()
            .unwrap_or_else(|| args.verdicts.with_extension("failures.jsonl"));
        write_records(&path, &failures)?;
        log.output(&path)?;
        log.summary(json!(summary));
        log.finish(&args.verdicts)?;
        return Err(CliError::Partial {
            stage: "annotate",
            failed: failures.len(),
            report: path,
        });
    }
    log.summary(json!(summary));
    log.finish(&args.verdicts)?;
    Ok(summary)
}
