use serde::{Deserialize, Serialize};

use crate::error::LlmError;

/// How [`crate::LlmClient`] treats the network and the exchange cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Call providers, do not touch the cache.
    Live,
    /// Call providers and append every successful exchange to the cache.
    Record,
    /// Serve from the cache only. A missing entry is an error.
    #[default]
    Replay,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            other => Err(format!(
                "unknown mode `{other}` (expected live|record|replay)"
            )),
        }
    }
}

/// One configured provider. The API key itself is never stored here, only
/// the name of the environment variable that holds it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub provider_id: String,
    /// OpenAI-compatible chat-completions URL.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    /// 0 disables request-rate limiting.
    #[serde(default)]
    pub requests_per_minute: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_concurrency() -> usize {
    4
}

fn default_timeout() -> u64 {
    600
}

impl ProviderConfig {
    pub fn new(provider_id: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            provider_id: provider_id.into(),
            endpoint: String::new(),
            model: model.into(),
            auth_env: None,
            max_concurrency: default_concurrency(),
            requests_per_minute: 0,
            timeout_secs: default_timeout(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.provider_id.is_empty() {
            return Err(LlmError::InvalidConfig("empty provider_id".into()));
        }
        if self.model.is_empty() {
            return Err(LlmError::InvalidConfig(format!(
                "provider `{}` has no model",
                self.provider_id
            )));
        }
        if self.max_concurrency == 0 {
            return Err(LlmError::InvalidConfig(format!(
                "provider `{}`: max_concurrency must be >= 1",
                self.provider_id
            )));
        }
        Ok(())
    }
}

/// Sampling parameters. All fields take part in the request hash, including
/// `sample_index`, which separates repeated draws of the same prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default)]
    pub sample_index: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: 0.6,
            top_p: 0.9,
            max_tokens: None,
            sample_index: 0,
        }
    }
}

impl SamplingParams {
    pub fn with_sample_index(mut self, index: u32) -> Self {
        self.sample_index = index;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    #[serde(default)]
    pub system: Option<String>,
    pub user: String,
}

impl Prompt {
    pub fn user(text: impl Into<String>) -> Self {
        Self {
            system: None,
            user: text.into(),
        }
    }

    pub fn with_system(system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            system: Some(system.into()),
            user: user.into(),
        }
    }
}
