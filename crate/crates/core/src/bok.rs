//! Best-of-k evaluation of a reward model over pools of candidate proofs.
//!
//! For a pool of N candidates with reward-model scores M and gold labels G,
//! the best-of-k value is the expected gold label of the highest-scored
//! candidate in a uniformly random k-subset.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pools up to this size use exact integer binomials; larger pools use a
/// floating-point product form.
pub const EXACT_BINOMIAL_MAX_N: usize = 128;

pub const DEFAULT_SCORE_REPEATS: u32 = 8;

#[derive(Debug, Error, PartialEq)]
pub enum BokError {
    #[error("no verdicts to aggregate")]
    EmptySet,
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("candidate {0} needs a score or verdicts")]
    MissingScore(String),
    #[error("candidate {id} has non-finite score {score}")]
    InvalidScore { id: String, score: f64 },
}

/// Mean of repeated 0/1 judgments.
pub fn aggregate_score(verdicts: &[u8]) -> Result<f64, BokError> {
    if verdicts.is_empty() {
        return Err(BokError::EmptySet);
    }
    Ok(verdicts.iter().map(|&v| f64::from(v.min(1))).sum::<f64>() / verdicts.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub score: f64,
    pub gold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub question_id: String,
    pub candidates: Vec<Candidate>,
    #[serde(default = "default_repeats")]
    pub score_repeats: u32,
}

fn default_repeats() -> u32 {
    DEFAULT_SCORE_REPEATS
}

/// Input form of a candidate: either a precomputed score or raw verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCandidate {
    pub id: String,
    #[serde(default)]
    pub verdicts: Option<Vec<u8>>,
    #[serde(default)]
    pub score: Option<f64>,
    pub gold: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPool {
    pub question_id: String,
    pub candidates: Vec<RawCandidate>,
}

impl RawPool {
    pub fn into_pool(self) -> Result<CandidatePool, BokError> {
        let mut repeats = None;
        let candidates = self
            .candidates
            .into_iter()
            .map(|c| {
                let score = match (&c.verdicts, c.score) {
                    (Some(v), _) => {
                        repeats.get_or_insert(v.len() as u32);
                        aggregate_score(v)?
                    }
                    (None, Some(s)) => s,
                    (None, None) => return Err(BokError::MissingScore(c.id)),
                };
                if !score.is_finite() {
                    return Err(BokError::InvalidScore { id: c.id, score });
                }
                let gold = match &c.gold {
                    serde_json::Value::Bool(b) => *b,
                    serde_json::Value::Number(n) => n.as_f64().is_some_and(|x| x != 0.0),
                    serde_json::Value::String(s) => s.trim().eq_ignore_ascii_case("true"),
                    _ => false,
                };
                Ok(Candidate {
                    id: c.id,
                    score,
                    gold,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CandidatePool {
            question_id: self.question_id,
            candidates,
            score_repeats: repeats.unwrap_or(DEFAULT_SCORE_REPEATS),
        })
    }
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.candidates.iter().filter(|c| c.gold).count()
    }

    /// True when every candidate is correct or every candidate is wrong.
    pub fn is_trivial(&self) -> bool {
        let c = self.positives();
        c == 0 || c == self.len()
    }

    /// The same pool scored by its gold labels.
    pub fn as_oracle(&self) -> CandidatePool {
        CandidatePool {
            candidates: self
                .candidates
                .iter()
                .map(|c| Candidate {
                    score: if c.gold { 1.0 } else { 0.0 },
                    ..c.clone()
                })
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Among tied top scores in a subset, pick one uniformly at random.
    #[default]
    ExpectedUniform,
    /// Among tied top scores, pick the candidate listed first in the pool.
    FirstIndex,
}

impl std::str::FromStr for TiePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "expected_uniform" | "uniform" => Ok(TiePolicy::ExpectedUniform),
            "first_index" | "first" => Ok(TiePolicy::FirstIndex),
            other => Err(format!("unknown tie policy `{other}`")),
        }
    }
}

/// `C(a, k) / C(n, k)` for `a <= n`.
struct Binomials {
    n: usize,
    row: Option<Vec<Vec<u128>>>,
}

impl Binomials {
    fn new(n: usize) -> Self {
        let row = (n <= EXACT_BINOMIAL_MAX_N).then(|| {
            let mut t = vec![vec![0u128; n + 1]; n + 1];
            for a in 0..=n {
                t[a][0] = 1;
                for k in 1..=a {
                    t[a][k] = t[a - 1][k - 1] + if k < a { t[a - 1][k] } else { 0 };
                }
            }
            t
        });
        Binomials { n, row }
    }

    fn c(&self, a: usize, k: usize) -> Option<u128> {
        self.row.as_ref().map(|t| if k > a { 0 } else { t[a][k] })
    }

    /// `C(a, k) / C(b, k)`.
    fn ratio(&self, a: usize, b: usize, k: usize) -> f64 {
        debug_assert!(a <= b && b <= self.n);
        if k > a {
            return 0.0;
        }
        match (self.c(a, k), self.c(b, k)) {
            (Some(x), Some(y)) => x as f64 / y as f64,
            _ => (0..k).map(|i| (a - i) as f64 / (b - i) as f64).product(),
        }
    }

    /// `C(a, j) / C(b, k)`, used for rank probabilities.
    fn rank_probability(&self, n: usize, r: usize, k: usize) -> f64 {
        // C(n - r, k - 1) / C(n, k)
        match (self.c(n - r, k - 1), self.c(n, k)) {
            (Some(x), Some(y)) => x as f64 / y as f64,
            _ => self.ratio(n - r, n - 1, k - 1) * k as f64 / n as f64,
        }
    }
}

fn check_k(pool: &CandidatePool, k: usize) -> Result<(), BokError> {
    let n = pool.len();
    if k == 0 || k > n {
        return Err(BokError::KOutOfRange { k, n });
    }
    Ok(())
}

/// Exact best-of-k expectation, computed from score levels without
/// enumerating subsets.
pub fn best_of_k_exact(pool: &CandidatePool, k: usize, tie: TiePolicy) -> Result<f64, BokError> {
    check_k(pool, k)?;
    let n = pool.len();
    let binom = Binomials::new(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        pool.candidates[b]
            .score
            .total_cmp(&pool.candidates[a].score)
            .then(a.cmp(&b))
    });
    match tie {
        TiePolicy::FirstIndex => Ok(order
            .iter()
            .enumerate()
            .filter(|(_, &i)| pool.candidates[i].gold)
            .map(|(rank, _)| binom.rank_probability(n, rank + 1, k))
            .sum()),
        TiePolicy::ExpectedUniform => {
            let mut total = 0.0;
            let mut above = 0;
            let mut start = 0;
            while start < n {
                let level = pool.candidates[order[start]].score;
                let end = start
                    + order[start..]
                        .iter()
                        .take_while(|&&i| pool.candidates[i].score == level)
                        .count();
                let size = end - start;
                let golds = order[start..end]
                    .iter()
                    .filter(|&&i| pool.candidates[i].gold)
                    .count();
                if golds > 0 {
                    // P(best level in the subset is this one)
                    let p = binom.ratio(n - above, n, k) - binom.ratio(n - above - size, n, k);
                    total += p * golds as f64 / size as f64;
                }
                above += size;
                start = end;
            }
            Ok(total)
        }
    }
}

/// Monte Carlo estimate over `samples` seeded uniform k-subsets.
pub fn best_of_k_mc(
    pool: &CandidatePool,
    k: usize,
    samples: usize,
    seed: u64,
    tie: TiePolicy,
) -> Result<f64, BokError> {
    check_k(pool, k)?;
    let samples = samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        let mut subset: Vec<usize> = index::sample(&mut rng, pool.len(), k).into_vec();
        subset.sort_unstable();
        total += subset_value(pool, &subset, tie);
    }
    Ok(total / samples as f64)
}

/// Gold value of the chosen candidate of one subset; ties under
/// `ExpectedUniform` contribute their average.
pub fn subset_value(pool: &CandidatePool, subset: &[usize], tie: TiePolicy) -> f64 {
    let best = subset
        .iter()
        .map(|&i| pool.candidates[i].score)
        .fold(f64::NEG_INFINITY, f64::max);
    let top: Vec<usize> = subset
        .iter()
        .copied()
        .filter(|&i| pool.candidates[i].score == best)
        .collect();
    match tie {
        TiePolicy::FirstIndex => f64::from(u8::from(pool.candidates[top[0]].gold)),
        TiePolicy::ExpectedUniform => {
            top.iter().filter(|&&i| pool.candidates[i].gold).count() as f64 / top.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveMethod {
    Exact {
        tie: TiePolicy,
    },
    MonteCarlo {
        samples: usize,
        seed: u64,
        tie: TiePolicy,
    },
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BokCurve {
    pub question_id: String,
    pub method: CurveMethod,
    /// Value at `k = index + 1`.
    pub values: Vec<f64>,
}

pub fn exact_curve(pool: &CandidatePool, tie: TiePolicy) -> BokCurve {
    BokCurve {
        question_id: pool.question_id.clone(),
        method: CurveMethod::Exact { tie },
        values: (1..=pool.len())
            .map(|k| best_of_k_exact(pool, k, tie).expect("k in range"))
            .collect(),
    }
}

pub fn mc_curve(pool: &CandidatePool, samples: usize, seed: u64, tie: TiePolicy) -> BokCurve {
    BokCurve {
        question_id: pool.question_id.clone(),
        method: CurveMethod::MonteCarlo { samples, seed, tie },
        values: (1..=pool.len())
            .map(|k| best_of_k_mc(pool, k, samples, seed, tie).expect("k in range"))
            .collect(),
    }
}

/// Upper-bound curve: the pool scored by its own gold labels.
pub fn oracle_curve(pool: &CandidatePool) -> BokCurve {
    BokCurve {
        method: CurveMethod::Oracle,
        ..exact_curve(&pool.as_oracle(), TiePolicy::ExpectedUniform)
    }
}

/// Pointwise mean of several curves, truncated to the shortest one.
pub fn mean_curve(curves: &[BokCurve]) -> Vec<f64> {
    let len = curves.iter().map(|c| c.values.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| curves.iter().map(|c| c.values[i]).sum::<f64>() / curves.len() as f64)
        .collect()
}

/// Splits pools into those kept for evaluation and the number dropped
/// because every candidate is correct or every candidate is wrong.
pub fn filter_trivial(pools: Vec<CandidatePool>) -> (Vec<CandidatePool>, usize) {
    let before = pools.len();
    let kept: Vec<CandidatePool> = pools.into_iter().filter(|p| !p.is_trivial()).collect();
    let dropped = before - kept.len();
    (kept, dropped)
}
