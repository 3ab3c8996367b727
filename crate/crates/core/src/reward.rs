//! Verdict extraction and reward scoring for reward-model rollouts.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Label;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RewardError {
    #[error("a rollout group needs at least 2 rewards, got {0}")]
    GroupTooSmall(usize),
}

/// One sampled generation of the reward model for an item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rollout {
    pub item_id: String,
    pub generation: String,
    pub token_length: u32,
    pub group_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub item_id: String,
    #[serde(default)]
    pub predicted: Option<Label>,
    pub gold: Label,
    pub fluency_pass: bool,
    pub reward: u8,
}

/// A verdict line: `### True` / `### False`, case-insensitive, with optional
/// `*` or `_` emphasis around the marker or the word and an optional
/// trailing period.
static VERDICT_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*[*_]*\s*###\s*[*_]*\s*(true|false)\s*[*_]*\s*[.!]?\s*[*_]*\s*$")
        .expect("verdict pattern compiles")
});

/// Whether a single line is a verdict marker line.
pub fn is_verdict_line(line: &str) -> bool {
    VERDICT_LINE.is_match(line)
}

/// Returns the verdict on the last marker line, or `None` when no line
/// carries a marker.
pub fn extract_verdict(generation: &str) -> Option<Label> {
    generation.lines().rev().find_map(|line| {
        VERDICT_LINE
            .captures(line)
            .map(|c| Label::from(c[1].eq_ignore_ascii_case("true")))
    })
}

/// Reward is 1 only for a present, correct verdict in a fluent generation.
pub fn score_rollout(r: &Rollout, gold: Label, fluency_pass: bool) -> RewardRecord {
    let predicted = extract_verdict(&r.generation);
    let reward = u8::from(predicted == Some(gold) && fluency_pass);
    RewardRecord {
        item_id: r.item_id.clone(),
        predicted,
        gold,
        fluency_pass,
        reward,
    }
}

/// Group-normalized advantages `(r - mean) / std` with population std. A
/// group with no spread yields zeros.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, RewardError> {
    let n = rewards.len();
    if n < 2 {
        return Err(RewardError::GroupTooSmall(n));
    }
    let mean = rewards.iter().sum::<f64>() / n as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std <= f64::EPSILON * mean.abs().max(1.0) {
        return Ok(vec![0.0; n]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// Reference RL hyperparameters. They are carried as configuration only;
/// nothing in this crate runs an optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlDefaults {
    pub learning_rate: f64,
    pub batch_size: u32,
    pub scheduler: String,
    pub weight_decay: f64,
    pub warmup_ratio: f64,
    pub rollout_n: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub clip_ratio_low: f64,
    pub clip_ratio_high: f64,
    pub use_kl_loss: bool,
    pub kl_loss_coef: f64,
    pub max_prompt_length: u32,
    pub max_response_length: u32,
}

impl Default for RlDefaults {
    fn default() -> Self {
        RlDefaults {
            learning_rate: 5e-7,
            batch_size: 480,
            scheduler: "cosine".into(),
            weight_decay: 0.1,
            warmup_ratio: 0.05,
            rollout_n: 8,
            temperature: 0.6,
            top_p: 0.9,
            clip_ratio_low: 3e-4,
            clip_ratio_high: 4e-4,
            use_kl_loss: true,
            kl_loss_coef: 0.05,
            max_prompt_length: 8192,
            max_response_length: 16000,
        }
    }
}
