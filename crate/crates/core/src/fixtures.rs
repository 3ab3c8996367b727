//! Published data tables bundled as reproduction fixtures.

use serde::{Deserialize, Serialize};

use crate::manifest::ProvenanceGroup;
use crate::model::{CombinationKey, Label, LabelProvenance, Method, QpcItem, Source, Split};
use crate::seed;

const TABLE3_JSON: &str = include_str!("../fixtures/table3.json");
const TABLE8_JSON: &str = include_str!("../fixtures/table8.json");
const VERDICTS_JSONL: &str = include_str!("../fixtures/verdicts.jsonl");
const FLUENCY_CLEAN_JSONL: &str = include_str!("../fixtures/fluency_clean.jsonl");
const FLUENCY_DEGENERATE_JSONL: &str = include_str!("../fixtures/fluency_degenerate.jsonl");

/// One row of the training-data distribution table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table3Row {
    pub group: ProvenanceGroup,
    pub source: Source,
    pub model: Option<String>,
    pub method: Method,
    pub positive: u64,
    pub negative: u64,
}

impl Table3Row {
    pub fn key(&self) -> CombinationKey {
        CombinationKey::new(self.source, self.model.as_deref(), self.method)
            .expect("fixture keys are valid")
    }

    fn provenance(&self) -> LabelProvenance {
        match self.method {
            Method::GroundTruth => LabelProvenance::Human,
            Method::Augment | Method::Translate | Method::NaiveNegative => {
                LabelProvenance::Construction
            }
            _ => LabelProvenance::LlmSilver,
        }
    }
}

pub fn table3_rows() -> Vec<Table3Row> {
    serde_json::from_str(TABLE3_JSON).expect("bundled table3 fixture parses")
}

pub fn table3_json() -> &'static str {
    TABLE3_JSON
}

/// Materializes every row of the distribution table as labeled train items.
pub fn table3_items() -> Vec<QpcItem> {
    let mut items = Vec::new();
    for (row_idx, row) in table3_rows().iter().enumerate() {
        let key = row.key();
        let labels = std::iter::repeat_n(Label::True, row.positive as usize)
            .chain(std::iter::repeat_n(Label::False, row.negative as usize));
        for (n, label) in labels.enumerate() {
            let question_id = format!("t3-{row_idx:02}-{n:05}");
            let proof = format!("Fixture proof {n} for {key}.");
            items.push(QpcItem {
                item_id: seed::item_id(
                    &question_id,
                    key.method.as_str(),
                    key.model.as_ref().map(|m| m.as_str()),
                    &proof,
                ),
                question_id,
                combination: key.clone(),
                split: Split::Train,
                label: Some(label),
                label_provenance: row.provenance(),
                proof,
            });
        }
    }
    items
}

/// One row of the published human-check table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table8Row {
    pub source: Source,
    pub model: String,
    pub method: Method,
    pub positive: u32,
    pub tp_ratio: f64,
    pub negative: u32,
    pub tn_ratio: f64,
    /// Published consistency ratio.
    pub ratio: f64,
    pub accepted: bool,
    pub checked: u32,
    pub generated: u32,
}

fn round_half_up(x: f64) -> u32 {
    // products like 16 * 0.94 carry float noise; nudge before flooring
    (x + 0.5 + 1e-9).floor() as u32
}

impl Table8Row {
    pub fn key(&self) -> CombinationKey {
        CombinationKey::new(self.source, Some(&self.model), self.method)
            .expect("fixture keys are valid")
    }

    /// Items on which human and silver labels agree, recovered from the
    /// published TP/TN ratios with round-half-up.
    pub fn expected_agreement(&self) -> (u32, u32) {
        let agree = round_half_up(f64::from(self.positive) * self.tp_ratio)
            + round_half_up(f64::from(self.negative) * self.tn_ratio);
        (agree, self.positive + self.negative)
    }

    pub fn expected_consistency(&self) -> f64 {
        let (agree, checked) = self.expected_agreement();
        f64::from(agree) / f64::from(checked)
    }
}

pub fn table8_rows() -> Vec<Table8Row> {
    serde_json::from_str(TABLE8_JSON).expect("bundled table8 fixture parses")
}

/// A reward-model generation with the verdict it should yield.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCase {
    pub id: String,
    pub text: String,
    pub expected: Option<bool>,
}

/// A generation in one of the fluency corpora. Degenerate cases list the
/// flags they are built to trigger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FluencyCase {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub expected_flags: Vec<String>,
}

fn parse_bundled<T: serde::de::DeserializeOwned>(raw: &str) -> Vec<T> {
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled fixture parses"))
        .collect()
}

pub fn verdict_corpus() -> Vec<VerdictCase> {
    parse_bundled(VERDICTS_JSONL)
}

pub fn fluency_clean_corpus() -> Vec<FluencyCase> {
    parse_bundled(FLUENCY_CLEAN_JSONL)
}

pub fn fluency_degenerate_corpus() -> Vec<FluencyCase> {
    parse_bundled(FLUENCY_DEGENERATE_JSONL)
}
