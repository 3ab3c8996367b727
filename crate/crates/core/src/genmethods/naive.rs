use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    CombinationKey, Label, LabelProvenance, Method, QpcItem, QuestionRecord, Source, Split,
};
use crate::seed::{item_id, Seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaiveKind {
    VeryShort,
    Abstain,
    Refusal,
}

impl NaiveKind {
    pub const ALL: [NaiveKind; 3] = [NaiveKind::VeryShort, NaiveKind::Abstain, NaiveKind::Refusal];

    fn as_str(self) -> &'static str {
        match self {
            NaiveKind::VeryShort => "very_short",
            NaiveKind::Abstain => "abstain",
            NaiveKind::Refusal => "refusal",
        }
    }
}

const VERY_SHORT_OPENERS: [&str; 6] = [
    "The result is clear.",
    "This follows immediately from the statement.",
    "By symmetry the claim holds.",
    "A direct check confirms the statement.",
    "The claim is a standard fact.",
    "It is easy to verify the statement.",
];

const VERY_SHORT_CLOSERS: [&str; 5] = [
    "Hence the proof is complete.",
    "This proves the claim.",
    "Therefore the statement holds.",
    "The conclusion follows.",
    "",
];

const ABSTAIN: [&str; 4] = [
    "I am not able to find a proof of this statement.",
    "I do not know how to prove this.",
    "I cannot determine whether the statement is true, so I will not attempt a proof.",
    "This problem is beyond what I can solve, so I leave it unanswered.",
];

const REFUSAL: [&str; 4] = [
    "I'm sorry, but I can't help with this request.",
    "I won't provide a proof for this problem.",
    "Sorry, I cannot assist with solving this problem.",
    "I must decline to answer this question.",
];

/// Builds a rule-based negative example for `q`: a proof that is too short to
/// be a proof, an explicit abstention, or a refusal. Always labeled false.
pub fn make_naive_negative(q: &QuestionRecord, kind: NaiveKind, seed: u64) -> QpcItem {
    let mut rng = ChaCha8Rng::seed_from_u64(
        Seed::derive("naive", &[&q.question_id, kind.as_str(), &Seed(seed).hex()]).0,
    );
    let proof = match kind {
        NaiveKind::VeryShort => {
            let opener = VERY_SHORT_OPENERS.choose(&mut rng).unwrap();
            let closer = VERY_SHORT_CLOSERS.choose(&mut rng).unwrap();
            if closer.is_empty() {
                (*opener).to_owned()
            } else {
                format!("{opener} {closer}")
            }
        }
        NaiveKind::Abstain => (*ABSTAIN.choose(&mut rng).unwrap()).to_owned(),
        NaiveKind::Refusal => (*REFUSAL.choose(&mut rng).unwrap()).to_owned(),
    };
    let combination = CombinationKey {
        source: Source::Other,
        model: None,
        method: Method::NaiveNegative,
    };
    QpcItem {
        item_id: item_id(&q.question_id, Method::NaiveNegative.as_str(), None, &proof),
        question_id: q.question_id.clone(),
        combination,
        split: Split::Unassigned,
        label: Some(Label::False),
        label_provenance: LabelProvenance::Construction,
        proof,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(id: &str) -> QuestionRecord {
        QuestionRecord {
            question_id: id.into(),
            source: Source::Usamo,
            statement: "Prove that there are infinitely many primes.".into(),
            reference_proofs: vec![],
            geometry: false,
        }
    }

    fn sentence_count(text: &str) -> usize {
        text.split_terminator(['.', '!', '?'])
            .filter(|s| !s.trim().is_empty())
            .count()
    }

    #[test]
    fn abstain_is_false_construction() {
        let item = make_naive_negative(&q("q1"), NaiveKind::Abstain, 3);
        assert_eq!(item.label, Some(Label::False));
        assert_eq!(item.label_provenance, LabelProvenance::Construction);
        assert_eq!(item.combination.method, Method::NaiveNegative);
        assert!(ABSTAIN.contains(&item.proof.as_str()));
        item.validate().unwrap();
    }

    #[test]
    fn very_short_is_deterministic_and_short() {
        for seed in 0..50 {
            let a = make_naive_negative(&q("q1"), NaiveKind::VeryShort, seed);
            let b = make_naive_negative(&q("q1"), NaiveKind::VeryShort, seed);
            assert_eq!(a, b);
            assert!(sentence_count(&a.proof) <= 2, "{}", a.proof);
        }
    }

    #[test]
    fn refusal_uses_refusal_family() {
        let item = make_naive_negative(&q("q2"), NaiveKind::Refusal, 9);
        assert!(REFUSAL.contains(&item.proof.as_str()));
    }
}
