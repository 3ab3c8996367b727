use std::collections::{BTreeMap, HashSet};

use qpc_core::genmethods::{
    assemble_mask_completion, make_naive_negative, plan_mask, AugmentMode, GenError,
    GenerationRequest, NaiveKind, PromptBuilder,
};
use qpc_core::seed::{item_id, Seed};
use qpc_core::{
    CombinationKey, JsonlStore, Label, LabelProvenance, Method, QpcItem, QuestionRecord, Split,
};
use qpc_llmio::{BatchRequest, LlmClient, Prompt};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{read_questions, write_records};
use crate::args::GenArgs;
use crate::config::LoadedConfig;
use crate::error::{CliError, Result};
use crate::runlog::RunLog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenFailure {
    pub request_id: String,
    pub provider_id: String,
    pub error: String,
}

#[derive(Debug, Default, Serialize)]
pub struct GenSummary {
    pub questions: usize,
    pub skipped_geometry: usize,
    pub requests: usize,
    pub skipped_short_proofs: usize,
    pub generated: usize,
    pub ground_truth: usize,
    pub naive_negatives: usize,
    pub duplicates: usize,
    pub failed: usize,
}

fn ground_truth_item(q: &QuestionRecord, proof: &str) -> QpcItem {
    QpcItem {
        item_id: item_id(&q.question_id, Method::GroundTruth.as_str(), None, proof),
        question_id: q.question_id.clone(),
        combination: CombinationKey {
            source: q.source,
            model: None,
            method: Method::GroundTruth,
        },
        split: Split::Unassigned,
        label: Some(Label::True),
        label_provenance: LabelProvenance::Human,
        proof: proof.to_owned(),
    }
}

/// Every generation request implied by the configuration, in a fixed order:
/// question, then model, then method, then reference proof.
pub fn build_requests(
    cfg: &LoadedConfig,
    questions: &BTreeMap<String, QuestionRecord>,
    summary: &mut GenSummary,
) -> Result<Vec<GenerationRequest>> {
    let gen = &cfg.config.generation;
    let templates = cfg.templates()?;
    let builders: Vec<PromptBuilder> = gen
        .models
        .iter()
        .map(|m| {
            PromptBuilder::new(m.clone())
                .with_templates(templates.clone())
                .with_translate_language(gen.translate_language.clone())
        })
        .collect();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for q in questions.values() {
        if q.geometry {
            summary.skipped_geometry += 1;
            continue;
        }
        summary.questions += 1;
        for b in &builders {
            for &method in &gen.methods {
                let mut built = Vec::new();
                match method {
                    Method::Proof => built.push(b.build_proof(q)?),
                    Method::Rephrase => {
                        for p in &q.reference_proofs {
                            built.push(b.build_rephrase(q, p)?);
                        }
                    }
                    Method::MaskCompletion => {
                        for p in &q.reference_proofs {
                            let seed = Seed::derive(
                                "mask",
                                &[
                                    &Seed(cfg.config.seed).hex(),
                                    &q.question_id,
                                    b.target_model(),
                                    p,
                                ],
                            );
                            match plan_mask(p, gen.mask_fraction, seed.0) {
                                Ok(plan) => built.push(b.build_mask_completion(q, p, &plan)?),
                                Err(GenError::TooShort { .. }) => summary.skipped_short_proofs += 1,
                                Err(e) => return Err(e.into()),
                            }
                        }
                    }
                    Method::Augment | Method::Translate => {
                        let mode = if method == Method::Augment {
                            AugmentMode::Wording
                        } else {
                            AugmentMode::Translate
                        };
                        for p in &q.reference_proofs {
                            built.push(b.build_augment(q, p, mode, Some(Label::True))?);
                        }
                    }
                    other => {
                        return Err(CliError::Config(format!(
                            "method {other} is not generative"
                        )))
                    }
                }
                for r in built {
                    if seen.insert(r.request_id.clone()) {
                        out.push(r);
                    }
                }
            }
        }
    }
    summary.requests = out.len();
    Ok(out)
}

/// Turns a model reply into an item. Content-preserving rewrites keep the
/// input's label; everything else waits for the verifier.
pub fn item_from_reply(
    req: &GenerationRequest,
    q: &QuestionRecord,
    reply: &str,
) -> Result<QpcItem> {
    let proof = match (&req.mask_plan, req.method) {
        (Some(plan), Method::MaskCompletion) => {
            let source = q
                .reference_proofs
                .iter()
                .find(|p| Some(qpc_core::seed::sha256_hex(p)) == req.source_proof_hash)
                .ok_or_else(|| {
                    CliError::Data(format!(
                        "request {}: source proof not found",
                        req.request_id
                    ))
                })?;
            assemble_mask_completion(source, plan, reply)?
        }
        _ => reply.trim().to_owned(),
    };
    let combination = CombinationKey::new(req.source, Some(&req.target_model), req.method)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let (label, label_provenance) = match req.expected_label {
        Some(l) => (Some(l), LabelProvenance::Construction),
        None => (None, LabelProvenance::Unlabeled),
    };
    Ok(QpcItem {
        item_id: item_id(
            &q.question_id,
            req.method.as_str(),
            Some(combination.model.as_ref().expect("model set").as_str()),
            &proof,
        ),
        question_id: q.question_id.clone(),
        combination,
        split: Split::Unassigned,
        label,
        label_provenance,
        proof,
    })
}

pub async fn run(
    cfg: &LoadedConfig,
    args: &GenArgs,
    client: Option<&LlmClient>,
) -> Result<GenSummary> {
    let mut log = RunLog::new("gen", cfg);
    log.input(&args.questions)?;
    let questions = read_questions(&args.questions)?;
    let mut summary = GenSummary::default();
    let requests = build_requests(cfg, &questions, &mut summary)?;
    write_records(&args.requests, &requests)?;
    log.output(&args.requests)?;
    if args.dry_run {
        log.summary(json!(summary));
        log.finish(&args.requests)?;
        return Ok(summary);
    }
    cfg.require_providers(cfg.config.generation.models.iter().cloned())?;
    let client = client.ok_or_else(|| CliError::Config("gen needs an LLM client".into()))?;

    let batch: Vec<BatchRequest> = requests
        .iter()
        .map(|r| BatchRequest {
            provider_id: r.target_model.clone(),
            prompt: Prompt::user(r.prompt.clone()),
            params: cfg.config.generation.params.clone(),
        })
        .collect();
    let outcome = client.run_batch(&batch).await;

    let store = JsonlStore::open(&args.store)?;
    let mut items = Vec::new();
    let mut ids = HashSet::new();
    let mut push = |item: QpcItem, items: &mut Vec<QpcItem>, summary: &mut GenSummary| {
        if store.contains(&item.item_id) || !ids.insert(item.item_id.clone()) {
            summary.duplicates += 1;
            false
        } else {
            items.push(item);
            true
        }
    };
    for q in questions.values().filter(|q| !q.geometry) {
        for p in &q.reference_proofs {
            if push(ground_truth_item(q, p), &mut items, &mut summary) {
                summary.ground_truth += 1;
            }
        }
        for n in 0..cfg.config.generation.naive_per_question {
            let kind = NaiveKind::ALL[n % NaiveKind::ALL.len()];
            let item = make_naive_negative(q, kind, cfg.config.seed.wrapping_add(n as u64));
            if push(item, &mut items, &mut summary) {
                summary.naive_negatives += 1;
            }
        }
    }
    for (req, reply) in requests.iter().zip(&outcome.responses) {
        let Some(reply) = reply else { continue };
        let q = &questions[&req.source_question_id];
        if push(item_from_reply(req, q, reply)?, &mut items, &mut summary) {
            summary.generated += 1;
        }
    }
    store.append_batch(items)?;
    log.output(&args.store)?;

    summary.failed = outcome.failures.len();
    if !outcome.failures.is_empty() {
        let failures: Vec<GenFailure> = outcome
            .failures
            .iter()
            .map(|f| GenFailure {
                request_id: requests[f.index].request_id.clone(),
                provider_id: requests[f.index].target_model.clone(),
                error: f.error.to_string(),
            })
            .collect();
        let path = args
            .failures
            .clone()
            .unwrap_or_else(|| args.requests.with_extension("failures.jsonl"));
        write_records(&path, &failures)?;
        log.output(&path)?;
        log.summary(json!(summary));
        log.finish(&args.requests)?;
        return Err(CliError::Partial {
            stage: "gen",
            failed: failures.len(),
            report: path,
        });
    }
    log.summary(json!(summary));
    log.finish(&args.requests)?;
    Ok(summary)
}
