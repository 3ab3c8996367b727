use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use proptest::prelude::*;
use qpc_core::model::{CombinationKey, Label, LabelProvenance, Method, QpcItem, Source, Split};
use qpc_core::verifier::{
    apply_consistency, apply_decision, decide, ConsistencyPolicy, Decision, DropReason, Ensemble,
    Rubric, RubricVerdict, Schedule, VerdictSet, VerifierError,
};
use qpc_llmio::{
    Completion, ExchangeRecord, LlmClient, LlmError, Mode, Prompt, ProviderConfig, ReplayCache,
    RetryPolicy, SamplingParams, Transport, TransportError,
};

fn rubric_json(correct: bool) -> String {
    format!(
        "Checked.\n```json\n{{\"condition1_satisfied\": {c}, \"condition2_satisfied\": {c}, \"condition3_satisfied\": true, \"condition4_satisfied\": true, \"proof_correct\": {c}}}\n```",
        c = correct
    )
}

fn item() -> QpcItem {
    QpcItem {
        item_id: "item-1".into(),
        question_id: "q1".into(),
        combination: CombinationKey::new(Source::Putnam, Some("m"), Method::Proof).unwrap(),
        split: Split::Unassigned,
        label: None,
        label_provenance: LabelProvenance::Unlabeled,
        proof: "A proof.".into(),
    }
}

fn labels_of(mask: u32, n: u32) -> Vec<Label> {
    (0..n).map(|i| Label::from(mask >> i & 1 == 1)).collect()
}

/// Independent tally: count votes, then apply each policy's definition.
fn oracle(labels: &[Label], unanimous: bool, min: usize) -> Decision {
    let t = labels.iter().filter(|l| **l == Label::True).count();
    let f = labels.len() - t;
    if unanimous {
        if f == 0 {
            Decision::Keep(Label::True)
        } else if t == 0 {
            Decision::Keep(Label::False)
        } else {
            Decision::Drop(DropReason::Inconsistent)
        }
    } else if t >= min {
        Decision::Keep(Label::True)
    } else if f >= min {
        Decision::Keep(Label::False)
    } else {
        Decision::Drop(DropReason::NoMajority)
    }
}

#[test]
fn all_vote_patterns_match_tally() {
    for mask in 0..32 {
        let labels = labels_of(mask, 5);
        assert_eq!(
            decide(&labels, ConsistencyPolicy::UNANIMOUS).unwrap(),
            oracle(&labels, true, 0)
        );
        assert_eq!(
            decide(&labels, ConsistencyPolicy::majority(4)).unwrap(),
            oracle(&labels, false, 4)
        );
        for min in 3..=5 {
            let u = decide(&labels, ConsistencyPolicy::UNANIMOUS).unwrap();
            let m = decide(&labels, ConsistencyPolicy::majority(min)).unwrap();
            if let Decision::Keep(l) = u {
                assert_eq!(m, Decision::Keep(l));
            }
        }
    }
}

proptest! {
    #[test]
    fn decisions_ignore_order(mask in 0u32..32, shuffle in Just(()).prop_perturb(|_, mut rng| {
        let mut idx: Vec<usize> = (0..5).collect();
        for i in (1..5).rev() { idx.swap(i, (rng.next_u32() as usize) % (i + 1)); }
        idx
    })) {
        let labels = labels_of(mask, 5);
        let permuted: Vec<Label> = shuffle.iter().map(|&i| labels[i]).collect();
        for p in [ConsistencyPolicy::UNANIMOUS, ConsistencyPolicy::majority(3), ConsistencyPolicy::majority(4)] {
            prop_assert_eq!(decide(&labels, p).unwrap(), decide(&permuted, p).unwrap());
        }
    }
}

#[test]
fn incomplete_sets_are_rejected() {
    let v = RubricVerdict {
        verifier_id: "a".into(),
        attempt_index: 0,
        rubric: Rubric {
            condition1_satisfied: true,
            condition2_satisfied: true,
            condition3_satisfied: true,
            condition4_satisfied: true,
            proof_correct: true,
        },
    };
    let vs = VerdictSet::new("i", Schedule::default(), vec![v], vec![]);
    assert!(!vs.complete);
    assert!(matches!(
        apply_consistency(&vs, ConsistencyPolicy::UNANIMOUS),
        Err(VerifierError::IncompleteSet { missing: 4, .. })
    ));
}

/// Scripted completion keyed by provider; counts calls per provider.
struct Scripted {
    replies: HashMap<String, Result<String, ()>>,
    calls: Mutex<HashMap<String, usize>>,
}

#[async_trait]
impl Completion for Scripted {
    async fn complete(
        &self,
        provider: &str,
        _: &Prompt,
        _: &SamplingParams,
    ) -> Result<String, LlmError> {
        *self
            .calls
            .lock()
            .unwrap()
            .entry(provider.to_owned())
            .or_default() += 1;
        match self.replies.get(provider) {
            Some(Ok(text)) => Ok(text.clone()),
            _ => Err(LlmError::ProviderError {
                provider: provider.into(),
                status: 500,
                message: "down".into(),
            }),
        }
    }
}

fn scripted(replies: &[(&str, Result<String, ()>)]) -> Scripted {
    Scripted {
        replies: replies
            .iter()
            .map(|(p, r)| (p.to_string(), r.clone()))
            .collect(),
        calls: Mutex::new(HashMap::new()),
    }
}

#[tokio::test]
async fn five_true_verdicts_keep_true() {
    let client = scripted(&[
        ("deepseek-r1", Ok(rubric_json(true))),
        ("gpt-5-mini", Ok(rubric_json(true))),
        ("gemini-2.5-flash", Ok(rubric_json(true))),
    ]);
    let vs = Ensemble::default()
        .run(&client, "Q", &item())
        .await
        .unwrap();
    assert!(vs.complete);
    assert_eq!(vs.verdicts.len(), 5);
    let d = apply_consistency(&vs, ConsistencyPolicy::UNANIMOUS).unwrap();
    assert_eq!(d, Decision::Keep(Label::True));
    let labeled = apply_decision(&item(), d).unwrap();
    assert_eq!(labeled.label_provenance, LabelProvenance::LlmSilver);
    assert_eq!(labeled.label, Some(Label::True));
    let calls = client.calls.lock().unwrap();
    assert_eq!(calls["deepseek-r1"], 3);
    assert_eq!(calls.values().sum::<usize>(), 5);
}

#[tokio::test]
async fn failing_provider_leaves_set_incomplete() {
    let client = scripted(&[
        ("deepseek-r1", Ok(rubric_json(false))),
        ("gpt-5-mini", Ok(rubric_json(false))),
        ("gemini-2.5-flash", Err(())),
    ]);
    let vs = Ensemble::default()
        .run(&client, "Q", &item())
        .await
        .unwrap();
    assert!(!vs.complete);
    assert_eq!(vs.missing.len(), 1);
    assert_eq!(vs.missing[0].verifier_id, "gemini-2.5-flash");
    let all_down = scripted(&[]);
    assert!(matches!(
        Ensemble::default().run(&all_down, "Q", &item()).await,
        Err(VerifierError::AllProvidersFailed { .. })
    ));
}

#[tokio::test]
async fn parse_failures_are_retried_then_recorded_missing() {
    let client = scripted(&[("a", Ok("no verdict here".into()))]);
    let ensemble = Ensemble {
        schedule: "a=1".parse().unwrap(),
        parse_retry: RetryPolicy::no_delay(3),
        ..Ensemble::default()
    };
    let err = ensemble.run(&client, "Q", &item()).await.unwrap_err();
    assert!(matches!(err, VerifierError::AllProvidersFailed { .. }));
    assert_eq!(client.calls.lock().unwrap()["a"], 4);
}

struct CountingTransport {
    calls: AtomicUsize,
}

#[async_trait]
impl Transport for CountingTransport {
    async fn send(
        &self,
        _: &ProviderConfig,
        prompt: &Prompt,
        params: &SamplingParams,
    ) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(rubric_json(
            !prompt.user.is_empty() && params.sample_index % 2 == 0,
        ))
    }
}

#[tokio::test]
async fn default_schedule_issues_five_logged_calls() {
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("cache.jsonl");
    let providers: Vec<ProviderConfig> = ["deepseek-r1", "gpt-5-mini", "gemini-2.5-flash"]
        .iter()
        .map(|p| ProviderConfig::new(*p, format!("{p}-model")))
        .collect();
    let transport = Arc::new(CountingTransport {
        calls: AtomicUsize::new(0),
    });
    let cache = Arc::new(ReplayCache::open(&cache_path).unwrap());
    let client = LlmClient::new(providers.clone(), Mode::Record, cache, transport.clone()).unwrap();
    let recorded = Ensemble::default()
        .run(&client, "Q", &item())
        .await
        .unwrap();
    assert_eq!(transport.calls.load(Ordering::SeqCst), 5);
    let ledger: Vec<ExchangeRecord> = std::fs::read_to_string(&cache_path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(ledger.len(), 5);
    assert_eq!(
        ledger
            .iter()
            .filter(|r| r.provider_id == "deepseek-r1")
            .count(),
        3
    );

    let replay_cache = Arc::new(ReplayCache::open(&cache_path).unwrap());
    let idle = Arc::new(CountingTransport {
        calls: AtomicUsize::new(0),
    });
    let replay = LlmClient::new(providers, Mode::Replay, replay_cache, idle.clone()).unwrap();
    let replayed = Ensemble::default()
        .run(&replay, "Q", &item())
        .await
        .unwrap();
    assert_eq!(idle.calls.load(Ordering::SeqCst), 0);
    assert_eq!(recorded, replayed);
}
