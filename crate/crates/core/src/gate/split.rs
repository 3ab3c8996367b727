use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AuditPlan, GateDecision, GateError, GateState, HumanLabel};
use crate::model::{CombinationKey, LabelProvenance, QpcItem, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub items: Vec<QpcItem>,
    /// Items of sampled questions that still lack a human label; they stay
    /// unassigned until judged.
    pub pending_test_labels: Vec<String>,
}

/// Assigns every item to Train, Test or Unassigned.
///
/// Items of sampled questions go to Test with their human label; a logged
/// judgment overrides a label the item already carried from a human source.
/// Outside the sample, silver-labeled items go to Train only if their
/// combination was accepted. Human-source and constructed items go to Train
/// and everything else stays unassigned.
pub fn finalize_split(
    items: &[QpcItem],
    plan: &AuditPlan,
    states: &[GateState],
    human: &BTreeMap<String, HumanLabel>,
) -> Result<SplitOutcome, GateError> {
    let pending: Vec<String> = states
        .iter()
        .filter(|s| s.decision == GateDecision::Pending)
        .map(|s| s.combination.canonical())
        .collect();
    if !pending.is_empty() {
        return Err(GateError::UndecidedGate {
            combinations: pending,
        });
    }
    let decisions: BTreeMap<&CombinationKey, GateDecision> = states
        .iter()
        .map(|s| (&s.combination, s.decision))
        .collect();

    let mut pending_test_labels = Vec::new();
    let out = items
        .iter()
        .map(|item| {
            let mut item = item.clone();
            if plan.is_sampled(&item.question_id) {
                let existing = (item.label_provenance == LabelProvenance::Human)
                    .then_some(item.label)
                    .flatten();
                match human.get(&item.item_id).copied().flatten().or(existing) {
                    Some(label) => {
                        item.split = Split::Test;
                        item.label = Some(label);
                        item.label_provenance = LabelProvenance::Human;
                    }
                    None => {
                        item.split = Split::Unassigned;
                        pending_test_labels.push(item.item_id.clone());
                    }
                }
                return Ok(item);
            }
            item.split = match (item.label_provenance, item.label) {
                (LabelProvenance::LlmSilver, Some(_)) => match decisions.get(&item.combination) {
                    Some(GateDecision::Accepted) => Split::Train,
                    Some(_) => Split::Unassigned,
                    None => {
                        return Err(GateError::UndecidedGate {
                            combinations: vec![item.combination.canonical()],
                        })
                    }
                },
                (LabelProvenance::Human | LabelProvenance::Construction, Some(_)) => Split::Train,
                _ => Split::Unassigned,
            };
            Ok(item)
        })
        .collect::<Result<Vec<_>, GateError>>()?;
    Ok(SplitOutcome {
        items: out,
        pending_test_labels,
    })
}
