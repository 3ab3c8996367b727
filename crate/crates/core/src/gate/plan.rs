use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AuditSchedule, GateError};
use crate::model::{CombinationKey, LabelProvenance, QpcItem};
use crate::seed::{ceil_ratio, Seed};

/// Audit order and batch sizes for one combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinationPlan {
    pub combination: CombinationKey,
    /// Silver-labeled items of this combination in the whole store.
    pub combination_size: usize,
    /// Silver-labeled items of this combination inside sampled questions.
    pub available: usize,
    /// Audit order over the available items.
    pub items: Vec<String>,
    /// Cumulative number of items exposed at each batch.
    pub exposures: Vec<usize>,
}

impl CombinationPlan {
    pub fn exposed(&self, batch_index: usize) -> &[String] {
        let n = self.exposures.get(batch_index).copied().unwrap_or(0);
        &self.items[..n]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditPlan {
    pub seed: Seed,
    pub schedule: AuditSchedule,
    pub question_count: usize,
    /// Sorted ids of the sampled questions.
    pub sampled_questions: Vec<String>,
    /// One entry per combination with silver-labeled items, sorted by key.
    pub combinations: Vec<CombinationPlan>,
}

impl AuditPlan {
    pub fn is_sampled(&self, question_id: &str) -> bool {
        self.sampled_questions
            .binary_search_by(|q| q.as_str().cmp(question_id))
            .is_ok()
    }

    pub fn combination(&self, key: &CombinationKey) -> Option<&CombinationPlan> {
        self.combinations.iter().find(|c| &c.combination == key)
    }
}

/// Samples questions uniformly and lays out the escalating audit batches
/// for every combination that has silver-labeled items.
pub fn sample_audit_plan(
    items: &[QpcItem],
    schedule: &AuditSchedule,
    seed: u64,
) -> Result<AuditPlan, GateError> {
    schedule.validate()?;
    if items.is_empty() {
        return Err(GateError::EmptyStore);
    }
    let seed = Seed(seed);
    let questions: Vec<&str> = items
        .iter()
        .map(|i| i.question_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let take = ceil_ratio(schedule.question_sample_rate, questions.len()).min(questions.len());
    let mut rng = ChaCha8Rng::seed_from_u64(Seed::derive("gate/questions", &[&seed.hex()]).0);
    let mut sampled: Vec<String> = index::sample(&mut rng, questions.len(), take)
        .into_iter()
        .map(|i| questions[i].to_owned())
        .collect();
    sampled.sort();
    let sampled_set: BTreeSet<&str> = sampled.iter().map(String::as_str).collect();

    let mut by_combination: BTreeMap<&CombinationKey, (usize, Vec<&str>)> = BTreeMap::new();
    for item in items
        .iter()
        .filter(|i| i.label_provenance == LabelProvenance::LlmSilver)
    {
        let entry = by_combination.entry(&item.combination).or_default();
        entry.0 += 1;
        if sampled_set.contains(item.question_id.as_str()) {
            entry.1.push(&item.item_id);
        }
    }

    let combinations = by_combination
        .into_iter()
        .map(|(key, (size, mut pool))| {
            pool.sort_unstable();
            let mut rng = ChaCha8Rng::seed_from_u64(
                Seed::derive("gate/order", &[&seed.hex(), &key.canonical()]).0,
            );
            pool.shuffle(&mut rng);
            let available = pool.len();
            let mut exposures: Vec<usize> = Vec::with_capacity(schedule.batch_volumes.len());
            for &v in &schedule.batch_volumes {
                let floor = exposures.last().copied().unwrap_or(0);
                exposures.push(ceil_ratio(v, size).min(available).max(floor));
            }
            if let Some(last) = exposures.last_mut() {
                *last = (*last).max(schedule.min_checked.min(available));
            }
            CombinationPlan {
                combination: key.clone(),
                combination_size: size,
                available,
                items: pool.into_iter().map(str::to_owned).collect(),
                exposures,
            }
        })
        .collect();

    Ok(AuditPlan {
        seed,
        schedule: schedule.clone(),
        question_count: questions.len(),
        sampled_questions: sampled,
        combinations,
    })
}
