//! Per-token loss weights for a group of rollouts.
//!
//! Each scheme gives every token of rollout `i` the same weight `w_i`, and
//! the weights of a group always carry unit mass: `sum(len_i * w_i) = 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ETA: f64 = 0.6;

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("rollout group is empty")]
    EmptyGroup,
    #[error("rollout {0} has zero length")]
    ZeroLength(usize),
    #[error("{advantages} advantages for {lengths} lengths")]
    LengthMismatch { advantages: usize, lengths: usize },
    #[error("eta {0} outside [0, 1]")]
    InvalidEta(f64),
    #[error("unknown weighting scheme `{0}`")]
    UnknownScheme(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightScheme {
    /// Average within each rollout, then across rollouts: `1 / (N * len_i)`.
    InnerSample,
    /// One average over every token of the group: `1 / sum(len)`.
    InterSample,
    /// `eta * inner + (1 - eta) * inter`.
    Balanced { eta: f64 },
}

impl Default for WeightScheme {
    fn default() -> Self {
        WeightScheme::Balanced { eta: DEFAULT_ETA }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightScheme::InnerSample => f.write_str("inner"),
            WeightScheme::InterSample => f.write_str("inter"),
            WeightScheme::Balanced { eta } => write!(f, "balanced:{eta}"),
        }
    }
}

impl FromStr for WeightScheme {
    type Err = WeightError;

    /// Accepts `inner`, `inter`, `balanced` or `balanced:<eta>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once([':', '=']) {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.as_str(), None),
        };
        let scheme = match (name, arg) {
            ("inner" | "inner_sample", None) => WeightScheme::InnerSample,
            ("inter" | "inter_sample", None) => WeightScheme::InterSample,
            ("balanced", None) => WeightScheme::default(),
            ("balanced", Some(eta)) => WeightScheme::Balanced {
                eta: eta
                    .parse()
                    .map_err(|_| WeightError::UnknownScheme(s.clone()))?,
            },
            _ => return Err(WeightError::UnknownScheme(s.clone())),
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

impl WeightScheme {
    pub fn validate(&self) -> Result<(), WeightError> {
        match *self {
            WeightScheme::Balanced { eta } if !(0.0..=1.0).contains(&eta) => {
                Err(WeightError::InvalidEta(eta))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenWeights {
    pub scheme: WeightScheme,
    pub lengths: Vec<u64>,
    /// Weight of each token of rollout `i`.
    pub weights: Vec<f64>,
}

impl TokenWeights {
    pub fn group_size(&self) -> usize {
        self.lengths.len()
    }

    /// `sum(len_i * w_i)`; 1 up to rounding.
    pub fn mass(&self) -> f64 {
        self.lengths
            .iter()
            .zip(&self.weights)
            .map(|(&l, &w)| l as f64 * w)
            .sum()
    }

    /// One weight per token, rollouts concatenated in order.
    pub fn per_token(&self) -> Vec<f64> {
        self.lengths
            .iter()
            .zip(&self.weights)
            .flat_map(|(&l, &w)| std::iter::repeat_n(w, l as usize))
            .collect()
    }
}

fn check(lengths: &[u64]) -> Result<(), WeightError> {
    if lengths.is_empty() {
        return Err(WeightError::EmptyGroup);
    }
    match lengths.iter().position(|&l| l == 0) {
        Some(i) => Err(WeightError::ZeroLength(i)),
        None => Ok(()),
    }
}

pub fn compute_weights(lengths: &[u64], scheme: WeightScheme) -> Result<TokenWeights, WeightError> {
    check(lengths)?;
    scheme.validate()?;
    let n = lengths.len() as f64;
    let total = lengths.iter().map(|&l| l as f64).sum::<f64>();
    let inner = |l: u64| 1.0 / (n * l as f64);
    let inter = 1.0 / total;
    let weights = lengths
        .iter()
        .map(|&l| match scheme {
            WeightScheme::InnerSample => inner(l),
            WeightScheme::InterSample => inter,
            WeightScheme::Balanced { eta } => eta * inner(l) + (1.0 - eta) * inter,
        })
        .collect();
    Ok(TokenWeights {
        scheme,
        lengths: lengths.to_vec(),
        weights,
    })
}

/// `sum(a_i * len_i * w_i)`: the scalar a scheme makes of a group's advantages.
pub fn weighted_objective_demo(
    advantages: &[f64],
    lengths: &[u64],
    scheme: WeightScheme,
) -> Result<f64, WeightError> {
    if advantages.len() != lengths.len() {
        return Err(WeightError::LengthMismatch {
            advantages: advantages.len(),
            lengths: lengths.len(),
        });
    }
    let w = compute_weights(lengths, scheme)?;
    Ok(advantages
        .iter()
        .zip(lengths)
        .zip(&w.weights)
        .map(|((&a, &l), &w)| a * l as f64 * w)
        .sum())
}
