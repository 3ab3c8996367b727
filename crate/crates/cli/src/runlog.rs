//! Run manifests: what a stage read, what it wrote, and under which
//! configuration, so any artifact can be traced back to its inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qpc_core::jsonl::write_atomic;
use qpc_core::seed::sha256_bytes_hex;
use serde::{Deserialize, Serialize};

use crate::config::LoadedConfig;
use crate::error::{CliError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_SUFFIX: &str = ".run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: qpc_llmio::Mode,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub summary: serde_json::Value,
}

/// Hash of a file, or of a directory as the sorted list of
/// `(relative path, file hash)` pairs. Run manifests inside a directory are
/// skipped so a manifest never hashes itself.
pub fn digest_path(path: &Path) -> Result<String> {
    if path.is_dir() {
        let files = dir_digests(path)?;
        let mut buf = Vec::new();
        for (rel, hash) in &files {
            buf.extend_from_slice(rel.as_bytes());
            buf.push(0);
            buf.extend_from_slice(hash.as_bytes());
            buf.push(b'\n');
        }
        Ok(sha256_bytes_hex(&buf))
    } else {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(sha256_bytes_hex(&bytes))
    }
}

/// Per-file digests under `root`, keyed by `/`-separated relative path.
pub fn dir_digests(root: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| CliError::io(&dir, e))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(MANIFEST_SUFFIX) || name.starts_with('.') {
                continue;
            }
            let rel = path
                .strip_prefix(root)
                .expect("walked path is under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            out.insert(rel, digest_path(&path)?);
        }
    }
    Ok(out)
}

/// Collects a stage's inputs and outputs and writes the manifest when done.
#[derive(Debug)]
pub struct RunLog {
    manifest: RunManifest,
    manifest_dir: Option<PathBuf>,
}

impl RunLog {
    pub fn new(stage: &str, cfg: &LoadedConfig) -> Self {
        RunLog {
            manifest: RunManifest {
                stage: stage.to_owned(),
                tool_version: TOOL_VERSION.to_owned(),
                config_hash: cfg.hash.clone(),
                seed: cfg.config.seed,
                mode: cfg.config.mode,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                summary: serde_json::Value::Null,
            },
            manifest_dir: cfg.config.manifest_dir.clone(),
        }
    }

    /// Records an input. Optional inputs that do not exist yet, such as an
    /// empty judgment log, are recorded as `absent`.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = if path.exists() {
            digest_path(path)?
        } else {
            "absent".to_owned()
        };
        self.manifest
            .inputs
            .insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.manifest
            .outputs
            .insert(path.display().to_string(), digest_path(path)?);
        Ok(())
    }

    pub fn summary(&mut self, summary: serde_json::Value) {
        self.manifest.summary = summary;
    }

    /// Writes the manifest next to `primary` (or into the manifest
    /// directory) and returns where it went.
    pub fn finish(self, primary: &Path) -> Result<PathBuf> {
        let path = match &self.manifest_dir {
            Some(dir) => dir.join(format!("{}{MANIFEST_SUFFIX}", self.manifest.stage)),
            None => {
                let name = primary
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| self.manifest.stage.clone());
                primary.with_file_name(format!("{name}{MANIFEST_SUFFIX}"))
            }
        };
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes()).map_err(|e| CliError::io(&path, e))?;
        tracing::debug!(manifest = %path.display(), "wrote run manifest");
        Ok(path)
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }
}
