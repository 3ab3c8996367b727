use qpc_core::genmethods::{make_naive_negative, NaiveKind};
use qpc_core::manifest::{DatasetManifest, ProvenanceGroup};
use qpc_core::model::{QuestionRecord, Source};

#[test]
fn naive_negatives_fill_the_auxiliary_group() {
    let items: Vec<_> = (0..1489)
        .map(|i| {
            let q = QuestionRecord {
                question_id: format!("q{i:05}"),
                source: Source::OlympiadBench,
                statement: format!("Problem {i}."),
                reference_proofs: vec![],
                geometry: false,
            };
            make_naive_negative(&q, NaiveKind::ALL[i % 3], i as u64)
        })
        .collect();
    let ids: std::collections::BTreeSet<_> = items.iter().map(|i| i.item_id.clone()).collect();
    assert_eq!(ids.len(), 1489);
    let m = DatasetManifest::from_items(&items);
    let aux = m.group(ProvenanceGroup::Auxiliary);
    assert_eq!((aux.total, aux.negative), (1489, 1489));
    assert_eq!(m.group(ProvenanceGroup::LlmAided).total, 0);
}
