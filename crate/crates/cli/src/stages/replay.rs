use std::collections::BTreeMap;
use std::path::Path;

use super::{read_json, write_json};
use crate::error::{CliError, Result};
use crate::runlog::dir_digests;

/// Per-file digests of a run directory, or the contents of a digest file
/// written by `replay record`.
pub fn load_digests(path: &Path) -> Result<BTreeMap<String, String>> {
    if path.is_dir() {
        dir_digests(path)
    } else {
        read_json(path)
    }
}

pub fn record(dir: &Path, out: &Path) -> Result<usize> {
    let digests = dir_digests(dir)?;
    write_json(out, &digests)?;
    Ok(digests.len())
}

/// Lists every file whose digest differs or that exists on one side only.
pub fn diff(left: &BTreeMap<String, String>, right: &BTreeMap<String, String>) -> Vec<String> {
    let mut out = Vec::new();
    for (k, v) in left {
        match right.get(k) {
            Some(w) if w == v => {}
            Some(_) => out.push(format!("{k}: content differs")),
            None => out.push(format!("{k}: only in left")),
        }
    }
    for k in right.keys().filter(|k| !left.contains_key(*k)) {
        out.push(format!("{k}: only in right"));
    }
    out
}

pub fn verify(left: &Path, right: &Path) -> Result<usize> {
    let (l, r) = (load_digests(left)?, load_digests(right)?);
    let differences = diff(&l, &r);
    if differences.is_empty() {
        Ok(l.len())
    } else {
        Err(CliError::ReplayMismatch(differences.join("; ")))
    }
}
