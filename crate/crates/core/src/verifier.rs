//! Ensemble rubric checking and the consistency filter that turns verdicts
//! into silver labels.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use futures::future::join_all;
use qpc_llmio::{Completion, LlmError, Prompt, RetryPolicy, SamplingParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::genmethods::templates::{TemplateSet, VERIFIER_RUBRIC};
use crate::jsontext::last_object_where;
use crate::model::{Label, LabelProvenance, QpcItem};

pub const RUBRIC_KEYS: [&str; 5] = [
    "condition1_satisfied",
    "condition2_satisfied",
    "condition3_satisfied",
    "condition4_satisfied",
    "proof_correct",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RubricError {
    #[error("no JSON object with rubric keys found")]
    NoJsonFound,
    #[error("rubric JSON is missing boolean key `{0}`")]
    MissingKey(String),
    #[error("rubric marks the proof correct while a condition is unsatisfied")]
    InconsistentRubric,
}

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("every scheduled verifier request for item {item_id} failed")]
    AllProvidersFailed { item_id: String },
    #[error("verdict set for item {item_id} is incomplete ({missing} missing)")]
    IncompleteSet { item_id: String, missing: usize },
    #[error("invalid consistency policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Template(#[from] crate::genmethods::GenError),
}

/// The four rubric conditions and the overall judgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    /// Logical soundness.
    pub condition1_satisfied: bool,
    /// Computational accuracy.
    pub condition2_satisfied: bool,
    /// Structural completeness.
    pub condition3_satisfied: bool,
    /// Notational rigor.
    pub condition4_satisfied: bool,
    pub proof_correct: bool,
}

impl Rubric {
    pub fn all_conditions(&self) -> bool {
        self.condition1_satisfied
            && self.condition2_satisfied
            && self.condition3_satisfied
            && self.condition4_satisfied
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricVerdict {
    pub verifier_id: String,
    pub attempt_index: u32,
    #[serde(flatten)]
    pub rubric: Rubric,
}

impl RubricVerdict {
    pub fn label(&self) -> Label {
        Label::from(self.rubric.proof_correct)
    }
}

/// Parses a verifier response: the last JSON object carrying rubric keys is
/// used, wherever it sits in the text.
pub fn parse_rubric(raw: &str) -> Result<Rubric, RubricError> {
    let object = last_object_where(raw, |m| RUBRIC_KEYS.iter().any(|k| m.contains_key(*k)))
        .ok_or(RubricError::NoJsonFound)?;
    let mut values = [false; 5];
    for (slot, key) in values.iter_mut().zip(RUBRIC_KEYS) {
        *slot = match object.get(key) {
            Some(Value::Bool(b)) => *b,
            Some(Value::String(s)) if s.eq_ignore_ascii_case("true") => true,
            Some(Value::String(s)) if s.eq_ignore_ascii_case("false") => false,
            _ => return Err(RubricError::MissingKey(key.to_owned())),
        };
    }
    let rubric = Rubric {
        condition1_satisfied: values[0],
        condition2_satisfied: values[1],
        condition3_satisfied: values[2],
        condition4_satisfied: values[3],
        proof_correct: values[4],
    };
    if rubric.proof_correct && !rubric.all_conditions() {
        return Err(RubricError::InconsistentRubric);
    }
    Ok(rubric)
}

/// How many verdicts each provider contributes per item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule(pub BTreeMap<String, u32>);

impl Default for Schedule {
    fn default() -> Self {
        Schedule(BTreeMap::from([
            ("deepseek-r1".to_owned(), 3),
            ("gpt-5-mini".to_owned(), 1),
            ("gemini-2.5-flash".to_owned(), 1),
        ]))
    }
}

impl Schedule {
    pub fn total(&self) -> u32 {
        self.0.values().sum()
    }

    /// `(provider, repeat index)` pairs in canonical order.
    pub fn slots(&self) -> Vec<(String, u32)> {
        self.0
            .iter()
            .flat_map(|(p, &n)| (0..n).map(move |i| (p.clone(), i)))
            .collect()
    }
}

impl FromStr for Schedule {
    type Err = VerifierError;

    /// Parses `provider=count,provider=count`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut map = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (provider, count) = part.split_once(['=', ':']).ok_or_else(|| {
                VerifierError::InvalidSchedule(format!("`{part}` is not provider=count"))
            })?;
            let count: u32 = count
                .trim()
                .parse()
                .map_err(|_| VerifierError::InvalidSchedule(format!("bad count in `{part}`")))?;
            if count == 0 {
                return Err(VerifierError::InvalidSchedule(format!(
                    "zero count in `{part}`"
                )));
            }
            *map.entry(provider.trim().to_owned()).or_insert(0) += count;
        }
        if map.is_empty() {
            return Err(VerifierError::InvalidSchedule("empty schedule".into()));
        }
        Ok(Schedule(map))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingVerdict {
    pub verifier_id: String,
    pub attempt_index: u32,
    pub error: String,
}

/// Every verdict collected for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictSet {
    pub item_id: String,
    pub schedule: Schedule,
    pub verdicts: Vec<RubricVerdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<MissingVerdict>,
    pub complete: bool,
}

impl VerdictSet {
    pub fn new(
        item_id: impl Into<String>,
        schedule: Schedule,
        mut verdicts: Vec<RubricVerdict>,
        mut missing: Vec<MissingVerdict>,
    ) -> Self {
        verdicts.sort_by(|a, b| {
            (&a.verifier_id, a.attempt_index).cmp(&(&b.verifier_id, b.attempt_index))
        });
        missing.sort_by(|a, b| {
            (&a.verifier_id, a.attempt_index).cmp(&(&b.verifier_id, b.attempt_index))
        });
        let complete = missing.is_empty() && verdicts.len() as u32 == schedule.total();
        VerdictSet {
            item_id: item_id.into(),
            schedule,
            verdicts,
            missing,
            complete,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    Unanimous,
    Majority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyPolicy {
    pub mode: PolicyMode,
    pub majority_min: u32,
}

impl ConsistencyPolicy {
    pub const UNANIMOUS: ConsistencyPolicy = ConsistencyPolicy {
        mode: PolicyMode::Unanimous,
        majority_min: 0,
    };

    pub fn majority(majority_min: u32) -> Self {
        ConsistencyPolicy {
            mode: PolicyMode::Majority,
            majority_min,
        }
    }

    pub fn validate(&self, total: u32) -> Result<(), VerifierError> {
        if self.mode == PolicyMode::Majority && !(3..=total).contains(&self.majority_min) {
            return Err(VerifierError::InvalidPolicy(format!(
                "majority_min {} must lie in 3..={total}",
                self.majority_min
            )));
        }
        Ok(())
    }
}

impl Default for ConsistencyPolicy {
    fn default() -> Self {
        Self::UNANIMOUS
    }
}

impl FromStr for ConsistencyPolicy {
    type Err = VerifierError;

    /// Accepts `unanimous`, `majority` (threshold 4) or `majority:N`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once([':', '=']) {
            None if s == "unanimous" => Ok(Self::UNANIMOUS),
            None if s == "majority" => Ok(Self::majority(4)),
            Some(("majority", n)) => n
                .trim()
                .parse()
                .map(Self::majority)
                .map_err(|_| VerifierError::InvalidPolicy(s.clone())),
            _ => Err(VerifierError::InvalidPolicy(s.clone())),
        }
    }
}

impl fmt::Display for ConsistencyPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            PolicyMode::Unanimous => f.write_str("unanimous"),
            PolicyMode::Majority => write!(f, "majority:{}", self.majority_min),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Inconsistent,
    NoMajority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Keep(Label),
    Drop(DropReason),
}

pub fn apply_consistency(
    vs: &VerdictSet,
    policy: ConsistencyPolicy,
) -> Result<Decision, VerifierError> {
    if !vs.complete {
        return Err(VerifierError::IncompleteSet {
            item_id: vs.item_id.clone(),
            missing: (vs.schedule.total() as usize).saturating_sub(vs.verdicts.len()),
        });
    }
    decide(
        &vs.verdicts
            .iter()
            .map(RubricVerdict::label)
            .collect::<Vec<_>>(),
        policy,
    )
}

/// Applies a policy to a bare list of labels.
pub fn decide(labels: &[Label], policy: ConsistencyPolicy) -> Result<Decision, VerifierError> {
    policy.validate(labels.len() as u32)?;
    let positives = labels.iter().filter(|l| **l == Label::True).count() as u32;
    let negatives = labels.len() as u32 - positives;
    Ok(match policy.mode {
        PolicyMode::Unanimous if labels.is_empty() => Decision::Drop(DropReason::Inconsistent),
        PolicyMode::Unanimous if negatives == 0 => Decision::Keep(Label::True),
        PolicyMode::Unanimous if positives == 0 => Decision::Keep(Label::False),
        PolicyMode::Unanimous => Decision::Drop(DropReason::Inconsistent),
        PolicyMode::Majority if positives >= policy.majority_min => Decision::Keep(Label::True),
        PolicyMode::Majority if negatives >= policy.majority_min => Decision::Keep(Label::False),
        PolicyMode::Majority => Decision::Drop(DropReason::NoMajority),
    })
}

/// Applies a keep decision to an item, giving it an LLM-silver label.
pub fn apply_decision(item: &QpcItem, decision: Decision) -> Option<QpcItem> {
    match decision {
        Decision::Keep(label) => Some(QpcItem {
            label: Some(label),
            label_provenance: LabelProvenance::LlmSilver,
            ..item.clone()
        }),
        Decision::Drop(_) => None,
    }
}

/// Sends the rubric prompt for one item to every scheduled provider.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub schedule: Schedule,
    pub templates: TemplateSet,
    pub params: SamplingParams,
    /// Re-asks after an unparseable response.
    pub parse_retry: RetryPolicy,
}

impl Default for Ensemble {
    fn default() -> Self {
        Ensemble {
            schedule: Schedule::default(),
            templates: TemplateSet::builtin(),
            params: SamplingParams::default(),
            parse_retry: RetryPolicy::default(),
        }
    }
}

/// Offset added to the sampling index when a parse failure forces a
/// re-ask, so the retry is a distinct cacheable request.
const RETRY_SAMPLE_STRIDE: u32 = 1000;

impl Ensemble {
    pub fn prompt(&self, question: &str, proof: &str) -> Result<Prompt, VerifierError> {
        Ok(Prompt::user(self.templates.render(
            VERIFIER_RUBRIC,
            &[("question", question), ("proof", proof)],
        )?))
    }

    pub async fn run(
        &self,
        client: &dyn Completion,
        question: &str,
        item: &QpcItem,
    ) -> Result<VerdictSet, VerifierError> {
        let prompt = self.prompt(question, &item.proof)?;
        let calls = self
            .schedule
            .slots()
            .into_iter()
            .map(|(provider, repeat)| self.one_verdict(client, &prompt, provider, repeat));
        let mut verdicts = Vec::new();
        let mut missing = Vec::new();
        for outcome in join_all(calls).await {
            match outcome {
                Ok(v) => verdicts.push(v),
                Err(m) => missing.push(m),
            }
        }
        if verdicts.is_empty() {
            return Err(VerifierError::AllProvidersFailed {
                item_id: item.item_id.clone(),
            });
        }
        Ok(VerdictSet::new(
            item.item_id.clone(),
            self.schedule.clone(),
            verdicts,
            missing,
        ))
    }

    async fn one_verdict(
        &self,
        client: &dyn Completion,
        prompt: &Prompt,
        provider: String,
        repeat: u32,
    ) -> Result<RubricVerdict, MissingVerdict> {
        let mut attempt = 0;
        loop {
            let params = self
                .params
                .clone()
                .with_sample_index(repeat + attempt * RETRY_SAMPLE_STRIDE);
            let error = match client.complete(&provider, prompt, &params).await {
                Ok(raw) => match parse_rubric(&raw) {
                    Ok(rubric) => {
                        return Ok(RubricVerdict {
                            verifier_id: provider,
                            attempt_index: repeat,
                            rubric,
                        })
                    }
                    Err(e) => e.to_string(),
                },
                // The client has already applied its own transport retries.
                Err(e) => return Err(missing(provider, repeat, &e)),
            };
            if attempt >= self.parse_retry.max_retries {
                return Err(MissingVerdict {
                    verifier_id: provider,
                    attempt_index: repeat,
                    error,
                });
            }
            let delay = self.parse_retry.delay_for(attempt);
            if !delay.is_zero() {
                tokio::time::sleep(delay).await;
            }
            attempt += 1;
        }
    }
}

fn missing(provider: String, repeat: u32, e: &LlmError) -> MissingVerdict {
    MissingVerdict {
        verifier_id: provider,
        attempt_index: repeat,
        error: e.to_string(),
    }
}
