//! Dataset statistics by combination and provenance group.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::model::{CombinationKey, Label, Method, QpcItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceGroup {
    LlmAided,
    HumanSource,
    Auxiliary,
}

impl ProvenanceGroup {
    /// Ground-truth proofs and their surface rewrites count as human-source,
    /// constructed degenerate proofs as auxiliary, everything else as LLM-aided.
    pub fn of(key: &CombinationKey) -> Self {
        match key.method {
            Method::NaiveNegative => ProvenanceGroup::Auxiliary,
            Method::GroundTruth | Method::Augment | Method::Translate => {
                ProvenanceGroup::HumanSource
            }
            Method::Rephrase | Method::Proof | Method::MaskCompletion | Method::Solution => {
                ProvenanceGroup::LlmAided
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelCounts {
    pub positive: u64,
    pub negative: u64,
    pub unlabeled: u64,
    pub total: u64,
}

impl LabelCounts {
    pub fn new(positive: u64, negative: u64, unlabeled: u64) -> Self {
        Self {
            positive,
            negative,
            unlabeled,
            total: positive + negative + unlabeled,
        }
    }

    fn record(&mut self, label: Option<Label>) {
        match label {
            Some(Label::True) => self.positive += 1,
            Some(Label::False) => self.negative += 1,
            None => self.unlabeled += 1,
        }
        self.total += 1;
    }
}

impl Add for LabelCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            positive: self.positive + rhs.positive,
            negative: self.negative + rhs.negative,
            unlabeled: self.unlabeled + rhs.unlabeled,
            total: self.total + rhs.total,
        }
    }
}

impl AddAssign for LabelCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub combinations: BTreeMap<CombinationKey, LabelCounts>,
    pub groups: BTreeMap<ProvenanceGroup, LabelCounts>,
    pub total: u64,
}

impl DatasetManifest {
    pub fn from_items<'a>(items: impl IntoIterator<Item = &'a QpcItem>) -> Self {
        let mut combinations: BTreeMap<CombinationKey, LabelCounts> = BTreeMap::new();
        for item in items {
            combinations
                .entry(item.combination.clone())
                .or_default()
                .record(item.label);
        }
        Self::from_combinations(combinations)
    }

    fn from_combinations(combinations: BTreeMap<CombinationKey, LabelCounts>) -> Self {
        let mut groups: BTreeMap<ProvenanceGroup, LabelCounts> = [
            ProvenanceGroup::LlmAided,
            ProvenanceGroup::HumanSource,
            ProvenanceGroup::Auxiliary,
        ]
        .into_iter()
        .map(|g| (g, LabelCounts::default()))
        .collect();
        for (key, counts) in &combinations {
            *groups
                .get_mut(&ProvenanceGroup::of(key))
                .expect("all groups seeded") += *counts;
        }
        let total = groups.values().map(|c| c.total).sum();
        Self {
            combinations,
            groups,
            total,
        }
    }

    pub fn group(&self, group: ProvenanceGroup) -> LabelCounts {
        self.groups.get(&group).copied().unwrap_or_default()
    }

    pub fn combination(&self, key: &CombinationKey) -> LabelCounts {
        self.combinations.get(key).copied().unwrap_or_default()
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

impl Add for DatasetManifest {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let mut combinations = self.combinations;
        for (key, counts) in rhs.combinations {
            *combinations.entry(key).or_default() += counts;
        }
        Self::from_combinations(combinations)
    }
}

/// Manifest of a store directory.
pub fn compute_manifest(
    dir: &std::path::Path,
) -> Result<DatasetManifest, crate::store::StoreError> {
    let items = crate::store::read_store(dir)?;
    Ok(DatasetManifest::from_items(&items))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LabelProvenance, Source, Split};

    fn item(id: &str, label: Option<Label>) -> QpcItem {
        QpcItem {
            item_id: id.into(),
            question_id: "q".into(),
            combination: CombinationKey::new(Source::Putnam, Some("gpt-5-mini"), Method::Proof)
                .unwrap(),
            split: Split::Unassigned,
            label,
            label_provenance: if label.is_some() {
                LabelProvenance::LlmSilver
            } else {
                LabelProvenance::Unlabeled
            },
            proof: "p".into(),
        }
    }

    #[test]
    fn empty_manifest_is_all_zero() {
        let m = DatasetManifest::from_items(&[]);
        assert_eq!(m.total, 0);
        assert!(m.combinations.is_empty());
        assert_eq!(m.group(ProvenanceGroup::LlmAided), LabelCounts::default());
    }

    #[test]
    fn counts_one_combination() {
        let items = [
            item("a", Some(Label::True)),
            item("b", Some(Label::True)),
            item("c", Some(Label::False)),
        ];
        let m = DatasetManifest::from_items(&items);
        let c = m.combination(&items[0].combination);
        assert_eq!((c.positive, c.negative), (2, 1));
        assert_eq!(m.group(ProvenanceGroup::LlmAided).total, 3);
        assert_eq!(m.total, 3);
    }

    #[test]
    fn pretty_json_uses_canonical_keys() {
        let m = DatasetManifest::from_items(&[item("a", None)]);
        let json = m.to_pretty_json();
        assert!(json.contains("\"putnam/gpt-5-mini/proof\""));
        assert!(json.contains("\"human_source\""));
    }
}
