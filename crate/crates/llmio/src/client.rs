use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use futures::future::join_all;

use crate::cache::{ExchangeRecord, ReplayCache};
use crate::config::{Mode, Prompt, ProviderConfig, SamplingParams};
use crate::error::{LlmError, TransportError};
use crate::hash::request_hash;
use crate::limiter::ProviderLimiter;
use crate::transport::Transport;

/// Anything that can turn a prompt into a completion for a named provider.
/// Consumers (the verifier ensemble, the fluency judge) depend on this trait
/// rather than on [`LlmClient`] directly.
#[async_trait]
pub trait Completion: Send + Sync {
    async fn complete(
        &self,
        provider_id: &str,
        prompt: &Prompt,
        params: &SamplingParams,
    ) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        Self {
            max_retries,
            base_delay: Duration::ZERO,
        }
    }

    pub fn delay_for(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << retry.min(16))
    }
}

struct ProviderSlot {
    config: ProviderConfig,
    limiter: ProviderLimiter,
    requests: AtomicU64,
}

pub struct LlmClient {
    providers: HashMap<String, ProviderSlot>,
    mode: Mode,
    cache: Arc<ReplayCache>,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient")
            .field("providers", &self.providers.keys().collect::<Vec<_>>())
            .field("mode", &self.mode)
            .field("cache", &self.cache.path())
            .finish()
    }
}

impl LlmClient {
    pub fn new(
        providers: Vec<ProviderConfig>,
        mode: Mode,
        cache: Arc<ReplayCache>,
        transport: Arc<dyn Transport>,
    ) -> Result<Self, LlmError> {
        let mut slots = HashMap::new();
        for config in providers {
            config.validate()?;
            let slot = ProviderSlot {
                limiter: ProviderLimiter::new(config.max_concurrency, config.requests_per_minute),
                requests: AtomicU64::new(0),
                config,
            };
            if slots
                .insert(slot.config.provider_id.clone(), slot)
                .is_some()
            {
                return Err(LlmError::InvalidConfig("duplicate provider_id".into()));
            }
        }
        Ok(Self {
            providers: slots,
            mode,
            cache,
            transport,
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn cache(&self) -> &ReplayCache {
        &self.cache
    }

    pub fn provider(&self, provider_id: &str) -> Option<&ProviderConfig> {
        self.providers.get(provider_id).map(|s| &s.config)
    }

    /// Transport attempts issued to a provider so far (cache hits excluded).
    pub fn request_count(&self, provider_id: &str) -> u64 {
        self.providers
            .get(provider_id)
            .map_or(0, |s| s.requests.load(Ordering::Relaxed))
    }

    pub async fn complete(
        &self,
        provider_id: &str,
        prompt: &Prompt,
        params: &SamplingParams,
    ) -> Result<String, LlmError> {
        let slot = self
            .providers
            .get(provider_id)
            .ok_or_else(|| LlmError::UnknownProvider(provider_id.to_owned()))?;
        let hash = request_hash(provider_id, &slot.config.model, prompt, params);

        match self.mode {
            Mode::Replay => self
                .cache
                .get(&hash)
                .map(|r| r.response)
                .ok_or(LlmError::CacheMiss { hash }),
            Mode::Live => self
                .call_with_retry(slot, prompt, params)
                .await
                .map(|(r, _)| r),
            Mode::Record => {
                let (response, attempt) = self.call_with_retry(slot, prompt, params).await?;
                self.cache.insert(ExchangeRecord {
                    request_hash: hash,
                    provider_id: provider_id.to_owned(),
                    model: slot.config.model.clone(),
                    response: response.clone(),
                    status: 200,
                    timestamp: chrono::Utc::now().to_rfc3339(),
                    attempt,
                })?;
                Ok(response)
            }
        }
    }

    async fn call_with_retry(
        &self,
        slot: &ProviderSlot,
        prompt: &Prompt,
        params: &SamplingParams,
    ) -> Result<(String, u32), LlmError> {
        let provider = &slot.config.provider_id;
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let result = {
                let _permit = slot.limiter.admit().await;
                slot.requests.fetch_add(1, Ordering::Relaxed);
                self.transport.send(&slot.config, prompt, params).await
            };
            let err = match result {
                Ok(text) => return Ok((text, attempt)),
                Err(err) => err,
            };
            if !err.is_retryable() || attempt > self.retry.max_retries {
                return Err(match err {
                    TransportError::RateLimited => LlmError::RateLimited {
                        provider: provider.clone(),
                        attempts: attempt,
                    },
                    TransportError::Status { status, message } => LlmError::ProviderError {
                        provider: provider.clone(),
                        status,
                        message,
                    },
                    other => LlmError::Transport {
                        provider: provider.clone(),
                        source: other,
                    },
                });
            }
            tracing::warn!(%provider, attempt, error = %err, "retrying provider call");
            tokio::time::sleep(self.retry.delay_for(attempt - 1)).await;
        }
    }

    /// Runs many requests concurrently under the per-provider limits.
    /// `responses[i]` corresponds to `requests[i]` regardless of completion order.
    pub async fn run_batch(&self, requests: &[BatchRequest]) -> BatchOutcome {
        let results = join_all(
            requests
                .iter()
                .map(|r| self.complete(&r.provider_id, &r.prompt, &r.params)),
        )
        .await;
        let mut responses = Vec::with_capacity(results.len());
        let mut failures = Vec::new();
        for (index, result) in results.into_iter().enumerate() {
            match result {
                Ok(text) => responses.push(Some(text)),
                Err(error) => {
                    responses.push(None);
                    failures.push(BatchFailure { index, error });
                }
            }
        }
        BatchOutcome {
            responses,
            failures,
        }
    }
}

#[async_trait]
impl Completion for LlmClient {
    async fn complete(
        &self,
        provider_id: &str,
        prompt: &Prompt,
        params: &SamplingParams,
    ) -> Result<String, LlmError> {
        LlmClient::complete(self, provider_id, prompt, params).await
    }
}

#[derive(Debug, Clone)]
pub struct BatchRequest {
    pub provider_id: String,
    pub prompt: Prompt,
    pub params: SamplingParams,
}

#[derive(Debug)]
pub struct BatchFailure {
    pub index: usize,
    pub error: LlmError,
}

#[derive(Debug)]
pub struct BatchOutcome {
    pub responses: Vec<Option<String>>,
    pub failures: Vec<BatchFailure>,
}

impl BatchOutcome {
    pub fn failed_indices(&self) -> Vec<usize> {
        self.failures.iter().map(|f| f.index).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}
