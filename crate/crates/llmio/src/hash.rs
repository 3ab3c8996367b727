//! Request hashing.
//!
//! `request_hash` is SHA-256 over a sequence of length-prefixed fields, each
//! written as an unsigned 64-bit little-endian byte length followed by the
//! UTF-8 bytes:
//!
//! 1. the domain tag `qpc-llmio/request/v1`
//! 2. `provider_id`
//! 3. `model`
//! 4. the system prompt (empty when absent)
//! 5. the user prompt
//! 6. the sampling parameters as compact JSON with keys in the order
//!    `temperature, top_p, max_tokens, sample_index` (floats in shortest
//!    round-trip form, absent `max_tokens` as `null`)
//!
//! The digest is rendered as 64 lowercase hex characters.

use sha2::{Digest, Sha256};

use crate::config::{Prompt, SamplingParams};

const DOMAIN: &str = "qpc-llmio/request/v1";

fn put(hasher: &mut Sha256, field: &[u8]) {
    hasher.update((field.len() as u64).to_le_bytes());
    hasher.update(field);
}

pub fn request_hash(
    provider_id: &str,
    model: &str,
    prompt: &Prompt,
    params: &SamplingParams,
) -> String {
    let params_json = serde_json::to_string(params).expect("sampling params serialize");
    let mut hasher = Sha256::new();
    put(&mut hasher, DOMAIN.as_bytes());
    put(&mut hasher, provider_id.as_bytes());
    put(&mut hasher, model.as_bytes());
    put(
        &mut hasher,
        prompt.system.as_deref().unwrap_or("").as_bytes(),
    );
    put(&mut hasher, prompt.user.as_bytes());
    put(&mut hasher, params_json.as_bytes());
    hex::encode(hasher.finalize())
}
