//! Domain records shared by every pipeline stage.
//!
//! Field order of the serialized records is the declaration order below and
//! is part of the on-disk format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "olympiadbench")]
    OlympiadBench,
    #[serde(rename = "olympiadbench-oe")]
    OlympiadBenchOe,
    #[serde(rename = "olympiadbench-cee")]
    OlympiadBenchCee,
    #[serde(rename = "putnam")]
    Putnam,
    #[serde(rename = "usamo")]
    Usamo,
    #[serde(rename = "student")]
    Student,
    #[serde(rename = "other")]
    Other,
}

impl Source {
    pub const ALL: [Source; 7] = [
        Source::OlympiadBench,
        Source::OlympiadBenchOe,
        Source::OlympiadBenchCee,
        Source::Putnam,
        Source::Usamo,
        Source::Student,
        Source::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::OlympiadBench => "olympiadbench",
            Source::OlympiadBenchOe => "olympiadbench-oe",
            Source::OlympiadBenchCee => "olympiadbench-cee",
            Source::Putnam => "putnam",
            Source::Usamo => "usamo",
            Source::Student => "student",
            Source::Other => "other",
        }
    }
}

impl FromStr for Source {
    type Err = KeyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        let norm = if norm == "olympiad-bench" {
            "olympiadbench".to_string()
        } else {
            norm
        };
        Source::ALL
            .into_iter()
            .find(|src| src.as_str() == norm)
            .ok_or_else(|| KeyParseError::UnknownSource(s.to_owned()))
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rephrase,
    Proof,
    MaskCompletion,
    Augment,
    Translate,
    GroundTruth,
    NaiveNegative,
    Solution,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Rephrase,
        Method::Proof,
        Method::MaskCompletion,
        Method::Augment,
        Method::Translate,
        Method::GroundTruth,
        Method::NaiveNegative,
        Method::Solution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rephrase => "rephrase",
            Method::Proof => "proof",
            Method::MaskCompletion => "mask_completion",
            Method::Augment => "augment",
            Method::Translate => "translate",
            Method::GroundTruth => "ground_truth",
            Method::NaiveNegative => "naive_negative",
            Method::Solution => "solution",
        }
    }

    /// Methods that produce a generation request for an LLM.
    pub fn is_generative(self) -> bool {
        matches!(
            self,
            Method::Rephrase
                | Method::Proof
                | Method::MaskCompletion
                | Method::Augment
                | Method::Translate
        )
    }
}

impl FromStr for Method {
    type Err = KeyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        let norm = match norm.as_str() {
            "mask" | "mask_replace" => "mask_completion",
            other => other,
        };
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| KeyParseError::UnknownMethod(s.to_owned()))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyParseError {
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("invalid model id `{0}`: use lowercase [a-z0-9._+:-], not `-` alone")]
    InvalidModel(String),
    #[error("malformed combination key `{0}` (expected source/model-or-dash/method)")]
    Malformed(String),
}

/// Normalized provider identifier: lowercase, whitespace mapped to `-`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelId(String);

impl ModelId {
    pub fn new(raw: &str) -> Result<Self, KeyParseError> {
        let norm: String = raw
            .trim()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join("-")
            .to_ascii_lowercase();
        let valid = !norm.is_empty()
            && norm != "-"
            && norm
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '+' | ':' | '-'));
        if valid {
            Ok(Self(norm))
        } else {
            Err(KeyParseError::InvalidModel(raw.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The (source, model, method) slice on which human gating operates.
///
/// Canonical form is `source/model-or-dash/method`, all lowercase; it is also
/// the serialized form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CombinationKey {
    pub source: Source,
    pub model: Option<ModelId>,
    pub method: Method,
}

impl CombinationKey {
    pub fn new(source: Source, model: Option<&str>, method: Method) -> Result<Self, KeyParseError> {
        Ok(Self {
            source,
            model: model.map(ModelId::new).transpose()?,
            method,
        })
    }

    pub fn canonical(&self) -> String {
        format!(
            "{}/{}/{}",
            self.source,
            self.model.as_ref().map_or("-", ModelId::as_str),
            self.method
        )
    }
}

impl fmt::Display for CombinationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl FromStr for CombinationKey {
    type Err = KeyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('/');
        let (Some(source), Some(model), Some(method), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(KeyParseError::Malformed(s.to_owned()));
        };
        let model = (model != "-").then_some(model);
        CombinationKey::new(source.parse()?, model, method.parse()?)
    }
}

impl Serialize for CombinationKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for CombinationKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// A proof-validity label. Serialized as a JSON boolean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "bool", into = "bool")]
pub enum Label {
    True,
    False,
}

impl From<bool> for Label {
    fn from(b: bool) -> Self {
        if b {
            Label::True
        } else {
            Label::False
        }
    }
}

impl From<Label> for bool {
    fn from(l: Label) -> bool {
        l == Label::True
    }
}

impl Label {
    pub fn as_bool(self) -> bool {
        self.into()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.as_bool() { "True" } else { "False" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelProvenance {
    Human,
    #[serde(rename = "llm_silver")]
    LlmSilver,
    Construction,
    Unlabeled,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub question_id: String,
    pub source: Source,
    pub statement: String,
    #[serde(default)]
    pub reference_proofs: Vec<String>,
    /// Geometry problems are excluded upstream; generation skips them.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub geometry: bool,
}

impl QuestionRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.question_id.is_empty() {
            return Err("question_id is empty".into());
        }
        if self.statement.trim().is_empty() {
            return Err(format!(
                "question {} has an empty statement",
                self.question_id
            ));
        }
        Ok(())
    }
}

/// One question-proof pair plus its check label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QpcItem {
    pub item_id: String,
    pub question_id: String,
    pub combination: CombinationKey,
    pub split: Split,
    pub label: Option<Label>,
    pub label_provenance: LabelProvenance,
    pub proof: String,
}

impl QpcItem {
    /// Checks the record invariants; the error names the violated one.
    pub fn validate(&self) -> Result<(), String> {
        if self.item_id.is_empty() {
            return Err("item_id must be non-empty".into());
        }
        if self.question_id.is_empty() {
            return Err("question_id must be non-empty".into());
        }
        if self.proof.trim().is_empty() && self.combination.method != Method::NaiveNegative {
            return Err(format!(
                "proof must be non-empty for method {}",
                self.combination.method
            ));
        }
        if self.split != Split::Unassigned && self.label.is_none() {
            return Err("label required when split is assigned".into());
        }
        if self.split == Split::Test && self.label_provenance != LabelProvenance::Human {
            return Err("test split requires a human label".into());
        }
        if self.label.is_none() != (self.label_provenance == LabelProvenance::Unlabeled) {
            return Err("label and label_provenance disagree about labeled state".into());
        }
        Ok(())
    }
}
