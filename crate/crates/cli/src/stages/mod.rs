//! One module per subcommand. Each `run` function takes parsed arguments and
//! a loaded configuration; LLM-backed stages also take the client so tests
//! and fixture priming can inject their own transport.

pub mod annotate;
pub mod bok;
pub mod fluency;
pub mod gate;
pub mod gen;
pub mod replay;
pub mod reward;
pub mod split;
pub mod stats;
pub mod weights;

use std::collections::BTreeMap;
use std::path::Path;

use qpc_core::jsonl::{read_jsonl, write_jsonl};
use qpc_core::QuestionRecord;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    Ok(read_jsonl(path)?)
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    Ok(write_jsonl(path, records)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    qpc_core::jsonl::write_atomic(path, text.as_bytes()).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Questions keyed by id, validated.
pub fn read_questions(path: &Path) -> Result<BTreeMap<String, QuestionRecord>> {
    let mut out = BTreeMap::new();
    for q in read_records::<QuestionRecord>(path)? {
        q.validate().map_err(CliError::Data)?;
        if out.insert(q.question_id.clone(), q).is_some() {
            return Err(CliError::Data(format!(
                "{}: duplicate question id",
                path.display()
            )));
        }
    }
    Ok(out)
}
