//! Provider-agnostic LLM client layer.
//!
//! Every network call made by the toolkit goes through [`LlmClient`]. The
//! client bounds concurrency and request rate per provider, retries transient
//! failures, and can record every exchange into an append-only JSONL cache
//! that later runs replay without touching the network.

mod cache;
mod client;
mod config;
mod error;
mod hash;
mod limiter;
mod transport;

pub use cache::{ExchangeRecord, ReplayCache};
pub use client::{BatchFailure, BatchOutcome, BatchRequest, Completion, LlmClient, RetryPolicy};
pub use config::{Mode, Prompt, ProviderConfig, SamplingParams};
pub use error::{LlmError, TransportError};
pub use hash::request_hash;
pub use transport::{HttpTransport, Transport};
