//! Surface-level fluency checks on reward-model generations: built-in
//! heuristics plus an optional LLM judge that reads only the generation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use qpc_llmio::{Completion, Prompt, SamplingParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::genmethods::templates::{TemplateSet, FLUENCY_JUDGE};
use crate::jsontext::last_object_where;
use crate::reward::is_verdict_line;

#[derive(Debug, Error)]
pub enum FluencyError {
    #[error("fluency judge unavailable: {0}")]
    JudgeUnavailable(String),
    #[error("could not parse the judge reply: {0}")]
    UnparseableJudgment(String),
    #[error("mode {0} needs a report that was not provided")]
    MissingReport(GateMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FluencyFlag {
    RepeatedTokens,
    PhraseLoop,
    HastyConclusion,
    IrrelevantInsertion,
    LengthAnomaly,
}

impl FluencyFlag {
    pub const ALL: [FluencyFlag; 5] = [
        FluencyFlag::RepeatedTokens,
        FluencyFlag::PhraseLoop,
        FluencyFlag::HastyConclusion,
        FluencyFlag::IrrelevantInsertion,
        FluencyFlag::LengthAnomaly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FluencyFlag::RepeatedTokens => "RepeatedTokens",
            FluencyFlag::PhraseLoop => "PhraseLoop",
            FluencyFlag::HastyConclusion => "HastyConclusion",
            FluencyFlag::IrrelevantInsertion => "IrrelevantInsertion",
            FluencyFlag::LengthAnomaly => "LengthAnomaly",
        }
    }
}

impl FromStr for FluencyFlag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        FluencyFlag::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(&norm))
            .ok_or_else(|| format!("unknown flag `{s}`"))
    }
}

impl fmt::Display for FluencyFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FluencyReport {
    pub pass: bool,
    pub flags: BTreeSet<FluencyFlag>,
    pub evidence: BTreeMap<FluencyFlag, String>,
    pub judge_used: bool,
}

impl FluencyReport {
    fn from_evidence(evidence: BTreeMap<FluencyFlag, String>, judge_used: bool) -> Self {
        FluencyReport {
            pass: evidence.is_empty(),
            flags: evidence.keys().copied().collect(),
            evidence,
            judge_used,
        }
    }
}

/// Detector thresholds. Token counts are whitespace-separated words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluencyConfig {
    /// Consecutive repeats of one word that count as degenerate.
    pub repeat_run: usize,
    /// Phrase length for loop detection.
    pub loop_ngram: usize,
    /// Occurrences of one phrase that count as a loop.
    pub loop_count: usize,
    /// Window, in words, that the loop occurrences must fit in.
    pub loop_window: usize,
    /// A verdict with fewer words of reasoning before it is hasty.
    pub hasty_tokens: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl Default for FluencyConfig {
    fn default() -> Self {
        FluencyConfig {
            repeat_run: 5,
            loop_ngram: 8,
            loop_count: 4,
            loop_window: 400,
            hasty_tokens: 50,
            min_tokens: 20,
            max_tokens: 12_000,
        }
    }
}

const TRIM: &[char] = &[
    '"', '\'', '`', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}', ',', '.', ';', ':', '!', '?',
    '(', ')', '[', ']', '{', '}', '*', '_',
];

/// Lowercased words with surrounding punctuation and emphasis removed.
/// Words that are pure punctuation disappear.
pub fn normalized_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(TRIM).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Runs every heuristic detector. Pure and deterministic.
pub fn heuristic_scan(generation: &str, config: &FluencyConfig) -> FluencyReport {
    let tokens = normalized_tokens(generation);
    let mut evidence = BTreeMap::new();
    if let Some(e) = repeated_tokens(&tokens, config.repeat_run) {
        evidence.insert(FluencyFlag::RepeatedTokens, e);
    }
    if let Some(e) = phrase_loop(&tokens, config) {
        evidence.insert(FluencyFlag::PhraseLoop, e);
    }
    if let Some(e) = hasty_conclusion(generation, config.hasty_tokens) {
        evidence.insert(FluencyFlag::HastyConclusion, e);
    }
    if tokens.len() < config.min_tokens || tokens.len() > config.max_tokens {
        evidence.insert(
            FluencyFlag::LengthAnomaly,
            format!(
                "{} words, expected {}..={}",
                tokens.len(),
                config.min_tokens,
                config.max_tokens
            ),
        );
    }
    FluencyReport::from_evidence(evidence, false)
}

fn repeated_tokens(tokens: &[String], run: usize) -> Option<String> {
    let run = run.max(2);
    let mut start = 0;
    for i in 1..=tokens.len() {
        if i == tokens.len() || tokens[i] != tokens[start] {
            let len = i - start;
            if len >= run && tokens[start].chars().any(char::is_alphabetic) {
                return Some(format!("`{}` repeated {len} times", tokens[start]));
            }
            start = i;
        }
    }
    None
}

fn phrase_loop(tokens: &[String], config: &FluencyConfig) -> Option<String> {
    let n = config.loop_ngram.max(1);
    let need = config.loop_count.max(2);
    if tokens.len() < n {
        return None;
    }
    let mut positions: HashMap<&[String], Vec<usize>> = HashMap::new();
    for i in 0..=tokens.len() - n {
        let occurrences = positions.entry(&tokens[i..i + n]).or_default();
        occurrences.push(i);
        if occurrences.len() >= need {
            let first = occurrences[occurrences.len() - need];
            if i + n - first <= config.loop_window {
                return Some(format!(
                    "`{}` occurs {need} times",
                    tokens[i..i + n].join(" ")
                ));
            }
        }
    }
    None
}

fn hasty_conclusion(generation: &str, min_reasoning: usize) -> Option<String> {
    let mut before = 0;
    for line in generation.lines() {
        if is_verdict_line(line) {
            return (before < min_reasoning)
                .then(|| format!("verdict `{}` after {before} words", line.trim()));
        }
        before += normalized_tokens(line).len();
    }
    None
}

/// Asks an LLM judge to flag fluency problems. Only the generation is sent.
pub async fn judge_scan(
    generation: &str,
    client: &dyn Completion,
    provider_id: &str,
    templates: &TemplateSet,
    params: &SamplingParams,
) -> Result<FluencyReport, FluencyError> {
    let text = templates
        .render(FLUENCY_JUDGE, &[("generation", generation)])
        .map_err(|e| FluencyError::JudgeUnavailable(e.to_string()))?;
    let reply = client
        .complete(provider_id, &Prompt::user(text), params)
        .await
        .map_err(|e| FluencyError::JudgeUnavailable(e.to_string()))?;
    parse_judgment(&reply)
}

/// Parses `{"flags": [...], "evidence": {...}}` from a judge reply.
pub fn parse_judgment(reply: &str) -> Result<FluencyReport, FluencyError> {
    let object = last_object_where(reply, |m| m.contains_key("flags"))
        .ok_or_else(|| FluencyError::UnparseableJudgment("no object with `flags`".into()))?;
    let Some(Value::Array(raw_flags)) = object.get("flags") else {
        return Err(FluencyError::UnparseableJudgment(
            "`flags` is not a list".into(),
        ));
    };
    let raw_evidence = object.get("evidence").and_then(Value::as_object);
    let mut evidence = BTreeMap::new();
    for raw in raw_flags {
        let name = raw
            .as_str()
            .ok_or_else(|| FluencyError::UnparseableJudgment("flag is not a string".into()))?;
        let flag: FluencyFlag = name.parse().map_err(FluencyError::UnparseableJudgment)?;
        let quote = raw_evidence
            .and_then(|e| e.get(name).or_else(|| e.get(flag.as_str())))
            .and_then(Value::as_str)
            .unwrap_or("reported by judge");
        evidence.insert(flag, quote.to_owned());
    }
    Ok(FluencyReport::from_evidence(evidence, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    #[default]
    HeuristicOnly,
    JudgeOnly,
    Union,
}

impl fmt::Display for GateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateMode::HeuristicOnly => "heuristic_only",
            GateMode::JudgeOnly => "judge_only",
            GateMode::Union => "union",
        })
    }
}

impl FromStr for GateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "heuristic" | "heuristic_only" => Ok(GateMode::HeuristicOnly),
            "judge" | "judge_only" => Ok(GateMode::JudgeOnly),
            "union" => Ok(GateMode::Union),
            other => Err(format!("unknown fluency gate mode `{other}`")),
        }
    }
}

/// Combines heuristic and judge reports. In union mode a flag raised by
/// either side fails the generation; heuristic evidence takes precedence.
pub fn gate_decision(
    heuristic: Option<&FluencyReport>,
    judge: Option<&FluencyReport>,
    mode: GateMode,
) -> Result<FluencyReport, FluencyError> {
    let missing = || FluencyError::MissingReport(mode);
    match mode {
        GateMode::HeuristicOnly => heuristic.cloned().ok_or_else(missing),
        GateMode::JudgeOnly => judge.cloned().ok_or_else(missing),
        GateMode::Union => {
            let (h, j) = (heuristic.ok_or_else(missing)?, judge.ok_or_else(missing)?);
            let mut evidence = j.evidence.clone();
            evidence.extend(h.evidence.clone());
            Ok(FluencyReport::from_evidence(evidence, true))
        }
    }
}
