use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::GateError;
use crate::jsonl::{read_jsonl, JsonlError};
use crate::model::Label;

/// One annotator's label for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanJudgment {
    pub item_id: String,
    pub annotator_id: String,
    pub label: Label,
    pub timestamp: String,
}

/// The human label of an item after combining annotators; `None` when
/// annotators are evenly split.
pub type HumanLabel = Option<Label>;

/// Majority label per judged item. An even split resolves to `None`.
pub fn resolve_human_labels(judgments: &[HumanJudgment]) -> BTreeMap<String, HumanLabel> {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for j in judgments {
        let entry = tally.entry(&j.item_id).or_default();
        match j.label {
            Label::True => entry.0 += 1,
            Label::False => entry.1 += 1,
        }
    }
    tally
        .into_iter()
        .map(|(id, (t, f))| {
            let label = match t.cmp(&f) {
                std::cmp::Ordering::Greater => Some(Label::True),
                std::cmp::Ordering::Less => Some(Label::False),
                std::cmp::Ordering::Equal => None,
            };
            (id.to_owned(), label)
        })
        .collect()
}

/// Append-only JSONL log of human judgments.
#[derive(Debug)]
pub struct JudgmentLog {
    path: Option<PathBuf>,
    judgments: Vec<HumanJudgment>,
    seen: BTreeSet<(String, String)>,
}

impl JudgmentLog {
    pub fn in_memory() -> Self {
        JudgmentLog {
            path: None,
            judgments: Vec::new(),
            seen: BTreeSet::new(),
        }
    }

    /// Opens (or starts) the log at `path`. A duplicate pair inside an
    /// existing file is reported as an error.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GateError> {
        let path = path.as_ref().to_path_buf();
        let mut log = JudgmentLog::in_memory();
        if path.exists() {
            for j in read_jsonl::<HumanJudgment>(&path)? {
                log.admit(j)?;
            }
        }
        log.path = Some(path);
        Ok(log)
    }

    fn admit(&mut self, j: HumanJudgment) -> Result<(), GateError> {
        if !self
            .seen
            .insert((j.item_id.clone(), j.annotator_id.clone()))
        {
            return Err(GateError::DuplicateJudgment {
                item_id: j.item_id,
                annotator_id: j.annotator_id,
            });
        }
        self.judgments.push(j);
        Ok(())
    }

    pub fn contains(&self, item_id: &str, annotator_id: &str) -> bool {
        self.seen
            .contains(&(item_id.to_owned(), annotator_id.to_owned()))
    }

    pub fn append(&mut self, j: HumanJudgment) -> Result<(), GateError> {
        if self.contains(&j.item_id, &j.annotator_id) {
            return Err(GateError::DuplicateJudgment {
                item_id: j.item_id,
                annotator_id: j.annotator_id,
            });
        }
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(&j).expect("judgment serializes");
            line.push('\n');
            let io = |e| {
                GateError::Jsonl(JsonlError::Io {
                    path: path.clone(),
                    source: e,
                })
            };
            let mut file: File = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(io)?;
            file.write_all(line.as_bytes()).map_err(io)?;
            file.sync_data().map_err(io)?;
        }
        self.admit(j)
    }

    pub fn judgments(&self) -> &[HumanJudgment] {
        &self.judgments
    }

    pub fn human_labels(&self) -> BTreeMap<String, HumanLabel> {
        resolve_human_labels(&self.judgments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j(item: &str, who: &str, label: bool) -> HumanJudgment {
        HumanJudgment {
            item_id: item.into(),
            annotator_id: who.into(),
            label: label.into(),
            timestamp: "2025-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn majority_and_ties() {
        let labels = resolve_human_labels(&[
            j("a", "x", true),
            j("a", "y", true),
            j("a", "z", false),
            j("b", "x", true),
            j("b", "y", false),
            j("c", "x", false),
        ]);
        assert_eq!(labels["a"], Some(Label::True));
        assert_eq!(labels["b"], None);
        assert_eq!(labels["c"], Some(Label::False));
    }

    #[test]
    fn duplicates_rejected_and_log_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("judgments.jsonl");
        let mut log = JudgmentLog::open(&path).unwrap();
        log.append(j("a", "x", true)).unwrap();
        log.append(j("a", "y", false)).unwrap();
        assert!(matches!(
            log.append(j("a", "x", false)),
            Err(GateError::DuplicateJudgment { .. })
        ));
        let reopened = JudgmentLog::open(&path).unwrap();
        assert_eq!(reopened.judgments(), log.judgments());
        assert!(reopened.contains("a", "y"));
    }
}
