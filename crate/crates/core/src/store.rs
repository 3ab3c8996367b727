//! Append-only dataset store.
//!
//! A store is a directory of segment files `segment-NNNNNNNN.jsonl`. Each
//! append writes one new segment to a temp file and renames it into place,
//! so a crash never leaves a partially written record visible. Reading
//! concatenates segments in name order.

use std::collections::HashSet;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

use crate::jsonl::{self, JsonlError};
use crate::model::QpcItem;
use crate::seed::sha256_bytes_hex;

const SEGMENT_PREFIX: &str = "segment-";
const SEGMENT_SUFFIX: &str = ".jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("duplicate item id {0}")]
    DuplicateId(String),
    #[error("item {item_id} violates schema: {reason}")]
    SchemaViolation { item_id: String, reason: String },
    #[error("corrupt record at {path}:{line}: {message}")]
    CorruptRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("store i/o at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<JsonlError> for StoreError {
    fn from(err: JsonlError) -> Self {
        match err {
            JsonlError::Corrupt {
                path,
                line,
                message,
            } => StoreError::CorruptRecord {
                path,
                line,
                message,
            },
            JsonlError::Io { path, source } => StoreError::Io { path, source },
        }
    }
}

#[derive(Debug)]
struct WriterState {
    next_segment: u64,
    ids: HashSet<String>,
}

/// Single-writer, many-reader item store. Appends are serialized internally.
#[derive(Debug)]
pub struct JsonlStore {
    dir: PathBuf,
    writer: Mutex<WriterState>,
}

fn segment_number(name: &str) -> Option<u64> {
    name.strip_prefix(SEGMENT_PREFIX)?
        .strip_suffix(SEGMENT_SUFFIX)?
        .parse()
        .ok()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Segment paths in append order.
pub fn segments(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut numbered = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(n) = segment_number(&name) {
            numbered.push((n, entry.path()));
        }
    }
    numbered.sort();
    Ok(numbered.into_iter().map(|(_, p)| p).collect())
}

/// Reads every item of a store directory without opening it for writing.
pub fn read_store(dir: &Path) -> Result<Vec<QpcItem>, StoreError> {
    let mut items = Vec::new();
    for path in segments(dir)? {
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        items.extend(jsonl::parse_lines::<QpcItem>(&path, BufReader::new(file))?);
    }
    Ok(items)
}

/// SHA-256 over the concatenated segment bytes, in append order.
pub fn store_digest(dir: &Path) -> Result<String, StoreError> {
    let mut all = Vec::new();
    for path in segments(dir)? {
        all.extend(fs::read(&path).map_err(io_err(&path))?);
    }
    Ok(sha256_bytes_hex(&all))
}

impl JsonlStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let paths = segments(&dir)?;
        let next_segment = paths
            .last()
            .and_then(|p| p.file_name())
            .and_then(|n| segment_number(&n.to_string_lossy()))
            .map_or(0, |n| n + 1);
        let ids = read_store(&dir)?.into_iter().map(|i| i.item_id).collect();
        Ok(Self {
            dir,
            writer: Mutex::new(WriterState { next_segment, ids }),
        })
    }

    /// Opens a store at `dir`, discarding any existing segments first.
    pub fn create_fresh(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        for path in segments(dir)? {
            fs::remove_file(&path).map_err(io_err(&path))?;
        }
        Self::open(dir)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.writer.lock().expect("store lock").ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.writer
            .lock()
            .expect("store lock")
            .ids
            .contains(item_id)
    }

    pub fn append(&self, item: QpcItem) -> Result<String, StoreError> {
        let id = item.item_id.clone();
        self.append_batch(vec![item])?;
        Ok(id)
    }

    /// Appends all items as one segment, or none of them.
    pub fn append_batch(&self, items: Vec<QpcItem>) -> Result<Vec<String>, StoreError> {
        let mut state = self.writer.lock().expect("store lock");
        let mut batch_ids = HashSet::new();
        for item in &items {
            item.validate()
                .map_err(|reason| StoreError::SchemaViolation {
                    item_id: item.item_id.clone(),
                    reason,
                })?;
            if state.ids.contains(&item.item_id) || !batch_ids.insert(item.item_id.clone()) {
                return Err(StoreError::DuplicateId(item.item_id.clone()));
            }
        }
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let path = self.dir.join(format!(
            "{SEGMENT_PREFIX}{:08}{SEGMENT_SUFFIX}",
            state.next_segment
        ));
        jsonl::write_atomic(&path, jsonl::to_jsonl_string(&items).as_bytes())
            .map_err(io_err(&path))?;
        state.next_segment += 1;
        let ids: Vec<String> = items.into_iter().map(|i| i.item_id).collect();
        state.ids.extend(ids.iter().cloned());
        Ok(ids)
    }

    pub fn items(&self) -> Result<Vec<QpcItem>, StoreError> {
        read_store(&self.dir)
    }

    pub fn digest(&self) -> Result<String, StoreError> {
        store_digest(&self.dir)
    }
}
