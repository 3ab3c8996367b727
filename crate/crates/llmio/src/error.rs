use thiserror::Error;

/// Failure of a single transport attempt. Retry decisions are made on this.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("rate limited by provider")]
    RateLimited,
    #[error("provider returned status {status}: {message}")]
    Status { status: u16, message: String },
    #[error("request timed out")]
    Timeout,
    #[error("network error: {0}")]
    Network(String),
    #[error("auth variable `{0}` is not set")]
    MissingAuth(String),
    #[error("could not decode provider response: {0}")]
    Decode(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::RateLimited | TransportError::Timeout | TransportError::Network(_) => {
                true
            }
            TransportError::Status { status, .. } => *status >= 500,
            TransportError::MissingAuth(_) | TransportError::Decode(_) => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("no cached response for request {hash}")]
    CacheMiss { hash: String },
    #[error("provider `{provider}` kept rate limiting after {attempts} attempts")]
    RateLimited { provider: String, attempts: u32 },
    #[error("provider `{provider}` failed with status {status}: {message}")]
    ProviderError {
        provider: String,
        status: u16,
        message: String,
    },
    #[error("provider `{provider}`: {source}")]
    Transport {
        provider: String,
        #[source]
        source: TransportError,
    },
    #[error("unknown provider `{0}`")]
    UnknownProvider(String),
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("cache i/o: {0}")]
    Cache(#[from] std::io::Error),
}
