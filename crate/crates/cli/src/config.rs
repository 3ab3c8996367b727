//! Run configuration: one JSON file with `${VAR}` interpolation, overridable
//! from the command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use qpc_core::fluency::{FluencyConfig, GateMode};
use qpc_core::gate::AuditSchedule;
use qpc_core::genmethods::{TemplateSet, DEFAULT_MASK_FRACTION};
use qpc_core::model::Method;
use qpc_core::reward::RlDefaults;
use qpc_core::seed::sha256_hex;
use qpc_core::verifier::{ConsistencyPolicy, Schedule};
use qpc_core::weights::WeightScheme;
use qpc_llmio::{LlmClient, Mode, ProviderConfig, ReplayCache, SamplingParams, Transport};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// Provider ids of the generating models.
    pub models: Vec<String>,
    pub methods: Vec<Method>,
    pub mask_fraction: f64,
    pub templates_dir: Option<PathBuf>,
    pub translate_language: String,
    pub params: SamplingParams,
    /// Rule-based negatives added per question.
    pub naive_per_question: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            models: Vec::new(),
            methods: vec![Method::Proof, Method::Rephrase, Method::MaskCompletion],
            mask_fraction: DEFAULT_MASK_FRACTION,
            templates_dir: None,
            translate_language: "English".into(),
            params: SamplingParams::default(),
            naive_per_question: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifierConfig {
    pub schedule: Schedule,
    /// `unanimous`, `majority` or `majority:N`.
    pub policy: String,
    pub params: SamplingParams,
    /// Items checked concurrently.
    pub parallel_items: usize,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            schedule: Schedule::default(),
            policy: "unanimous".into(),
            params: SamplingParams::default(),
            parallel_items: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FluencySettings {
    #[serde(flatten)]
    pub thresholds: FluencyConfig,
    pub mode: GateMode,
    pub judge_provider: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightSettings {
    pub scheme: WeightScheme,
    pub group_size: u32,
}

impl Default for WeightSettings {
    fn default() -> Self {
        WeightSettings {
            scheme: WeightScheme::default(),
            group_size: RlDefaults::default().rollout_n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: Mode,
    /// Exchange cache used in record and replay modes.
    pub cache_path: Option<PathBuf>,
    pub manifest_dir: Option<PathBuf>,
    pub providers: Vec<ProviderConfig>,
    pub generation: GenerationConfig,
    pub verifier: VerifierConfig,
    pub audit: AuditSchedule,
    pub fluency: FluencySettings,
    pub weights: WeightSettings,
    pub rl: RlDefaults,
}

/// Replaces `${NAME}` with the value of environment variable `NAME`.
pub fn interpolate(raw: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String> {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| CliError::Config("unterminated ${...} in config".into()))?;
        let name = &after[..end];
        let value = lookup(name)
            .ok_or_else(|| CliError::Config(format!("environment variable {name} is not set")))?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// A loaded configuration plus where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Directory that relative paths in the file are resolved against.
    pub base_dir: PathBuf,
    /// Hash of the file text before interpolation and of the overrides, so
    /// secrets never influence or leak through it.
    pub hash: String,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub manifest_dir: Option<PathBuf>,
    pub cache_path: Option<PathBuf>,
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let (mut config, base_dir, raw) = match path {
            Some(p) => {
                let raw = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                let text = interpolate(&raw, |k| std::env::var(k).ok())?;
                let config: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (config, base, raw)
            }
            None => (RunConfig::default(), PathBuf::new(), String::new()),
        };
        let mut hashed = raw;
        if let Some(mode) = overrides.mode {
            config.mode = mode;
            hashed.push_str(&format!("\n--mode={mode:?}"));
        }
        if let Some(seed) = overrides.seed {
            config.seed = seed;
            hashed.push_str(&format!("\n--seed={seed}"));
        }
        let mut loaded = LoadedConfig {
            config,
            base_dir,
            hash: String::new(),
        };
        if let Some(dir) = &overrides.manifest_dir {
            loaded.config.manifest_dir = Some(dir.clone());
        } else if let Some(dir) = loaded.config.manifest_dir.take() {
            loaded.config.manifest_dir = Some(loaded.resolve(&dir));
        }
        if let Some(cache) = &overrides.cache_path {
            loaded.config.cache_path = Some(cache.clone());
            hashed.push_str(&format!("\n--cache={}", cache.display()));
        } else if let Some(cache) = loaded.config.cache_path.take() {
            loaded.config.cache_path = Some(loaded.resolve(&cache));
        }
        if let Some(dir) = loaded.config.generation.templates_dir.take() {
            loaded.config.generation.templates_dir = Some(loaded.resolve(&dir));
        }
        loaded.hash = sha256_hex(&hashed);
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        for p in &c.providers {
            p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        c.audit
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let policy = self.policy()?;
        policy
            .validate(c.verifier.schedule.total())
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !(c.generation.mask_fraction > 0.0 && c.generation.mask_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "mask_fraction {} outside (0, 1)",
                c.generation.mask_fraction
            )));
        }
        if let Some(m) = c.generation.methods.iter().find(|m| !m.is_generative()) {
            return Err(CliError::Config(format!(
                "method {m} has no generation prompt"
            )));
        }
        c.weights
            .scheme
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn policy(&self) -> Result<ConsistencyPolicy> {
        self.config
            .verifier
            .policy
            .parse()
            .map_err(|e: qpc_core::verifier::VerifierError| CliError::Config(e.to_string()))
    }

    pub fn templates(&self) -> Result<TemplateSet> {
        match &self.config.generation.templates_dir {
            Some(dir) => Ok(TemplateSet::load_dir(dir)?),
            None => Ok(TemplateSet::builtin()),
        }
    }

    /// Client over the configured providers. Record and replay modes need a
    /// cache path.
    pub fn client(&self, transport: Arc<dyn Transport>) -> Result<LlmClient> {
        let c = &self.config;
        let cache = match (&c.cache_path, c.mode) {
            (Some(path), _) => ReplayCache::open(path).map_err(|e| CliError::io(path, e))?,
            (None, Mode::Live) => ReplayCache::in_memory(),
            (None, mode) => {
                return Err(CliError::Config(format!(
                    "mode {mode:?} needs cache_path in the config or --cache"
                )))
            }
        };
        Ok(LlmClient::new(
            c.providers.clone(),
            c.mode,
            Arc::new(cache),
            transport,
        )?)
    }

    pub fn require_providers(&self, ids: impl IntoIterator<Item = String>) -> Result<()> {
        for id in ids {
            if !self.config.providers.iter().any(|p| p.provider_id == id) {
                return Err(CliError::Config(format!(
                    "provider `{id}` is not configured"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation() {
        let env = |k: &str| (k == "KEY").then(|| "v".to_string());
        assert_eq!(interpolate("a ${KEY} b", env).unwrap(), "a v b");
        assert!(interpolate("${MISSING}", env).is_err());
        assert!(interpolate("${KEY", env).is_err());
        assert_eq!(interpolate("plain $ text", env).unwrap(), "plain $ text");
    }

    #[test]
    fn defaults_follow_reference_values() {
        let c = RunConfig::default();
        assert_eq!(c.weights.group_size, 8);
        assert_eq!(c.weights.scheme, WeightScheme::Balanced { eta: 0.6 });
        assert_eq!(c.verifier.schedule.total(), 5);
        assert_eq!(c.rl.rollout_n, 8);
        assert_eq!(c.audit.min_checked, 30);
    }

    #[test]
    fn partial_file_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"seed": 5, "audit": {"question_sample_rate": 0.5}, "cache_path": "cache.jsonl"}"#,
        )
        .unwrap();
        let a = LoadedConfig::load(Some(&path), &Overrides::default()).unwrap();
        assert_eq!(a.config.seed, 5);
        assert_eq!(a.config.audit.question_sample_rate, 0.5);
        assert_eq!(a.config.audit.min_checked, 30);
        assert_eq!(
            a.config.cache_path.as_deref(),
            Some(dir.path().join("cache.jsonl").as_path())
        );
        let b = LoadedConfig::load(
            Some(&path),
            &Overrides {
                seed: Some(6),
                ..Overrides::default()
            },
        )
        .unwrap();
        assert_eq!(b.config.seed, 6);
        assert_ne!(a.hash, b.hash);
        std::fs::write(&path, r#"{"unknown_key": 1}"#).unwrap();
        assert!(matches!(
            LoadedConfig::load(Some(&path), &Overrides::default()),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn secrets_do_not_change_the_hash() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"providers": [{"provider_id": "p", "endpoint": "${QPC_TEST_ENDPOINT}", "model": "m"}]}"#,
        )
        .unwrap();
        std::env::set_var("QPC_TEST_ENDPOINT", "http://one");
        let a = LoadedConfig::load(Some(&path), &Overrides::default()).unwrap();
        std::env::set_var("QPC_TEST_ENDPOINT", "http://two");
        let b = LoadedConfig::load(Some(&path), &Overrides::default()).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_eq!(b.config.providers[0].endpoint, "http://two");
    }
}
