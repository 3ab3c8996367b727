use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};

use crate::config::{Prompt, ProviderConfig, SamplingParams};
use crate::error::TransportError;

/// A single attempt at one chat completion. Implementations do not retry.
#[async_trait]
pub trait Transport: Send + Sync {
    async fn send(
        &self,
        provider: &ProviderConfig,
        prompt: &Prompt,
        params: &SamplingParams,
    ) -> Result<String, TransportError>;
}

/// OpenAI-compatible chat-completions over HTTP. Every provider is a config
/// entry pointing at such an endpoint.
#[derive(Debug, Clone, Default)]
pub struct HttpTransport {
    client: reqwest::Client,
}

impl HttpTransport {
    pub fn new() -> Self {
        Self::default()
    }

    fn body(provider: &ProviderConfig, prompt: &Prompt, params: &SamplingParams) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &prompt.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": prompt.user}));
        let mut body = json!({
            "model": provider.model,
            "messages": messages,
            "temperature": params.temperature,
            "top_p": params.top_p,
        });
        if let Some(max_tokens) = params.max_tokens {
            body["max_tokens"] = json!(max_tokens);
        }
        body
    }
}

#[async_trait]
impl Transport for HttpTransport {
    async fn send(
        &self,
        provider: &ProviderConfig,
        prompt: &Prompt,
        params: &SamplingParams,
    ) -> Result<String, TransportError> {
        let mut request = self
            .client
            .post(&provider.endpoint)
            .timeout(Duration::from_secs(provider.timeout_secs))
            .json(&Self::body(provider, prompt, params));
        if let Some(var) = &provider.auth_env {
            let key = std::env::var(var).map_err(|_| TransportError::MissingAuth(var.clone()))?;
            request = request.bearer_auth(key);
        }

        let response = request.send().await.map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Network(e.to_string())
            }
        })?;
        let status = response.status();
        if status.as_u16() == 429 {
            return Err(TransportError::RateLimited);
        }
        if !status.is_success() {
            let message = response.text().await.unwrap_or_default();
            return Err(TransportError::Status {
                status: status.as_u16(),
                message: message.chars().take(500).collect(),
            });
        }
        let payload: Value = response
            .json()
            .await
            .map_err(|e| TransportError::Decode(e.to_string()))?;
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| TransportError::Decode("missing choices[0].message.content".into()))
    }
}
