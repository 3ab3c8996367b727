//! Deterministic stand-in for model providers, used to prime and check the
//! mini-corpus replay cache. Replies depend only on the provider and prompt.

use async_trait::async_trait;
use qpc_core::seed::sha256_hex;
use qpc_llmio::{Prompt, ProviderConfig, SamplingParams, Transport, TransportError};

#[derive(Debug, Default)]
pub struct ScriptedTransport;

fn byte(hash: &str, i: usize) -> u8 {
    u8::from_str_radix(&hash[2 * i..2 * i + 2], 16).expect("hex digest")
}

fn gap_count(prompt: &str) -> usize {
    (1..)
        .take_while(|k| prompt.contains(&format!("[MASK {k}]")))
        .count()
}

fn generation(provider: &str, prompt: &str) -> String {
    let h = sha256_hex(prompt);
    let gaps = gap_count(prompt);
    if gaps > 0 {
        (1..=gaps)
            .map(|k| {
                format!(
                    "[MASK {k}]\nBy the preceding step, case {k} follows ({provider}, {}).",
                    &h[..8]
                )
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    } else {
        format!(
            "We proceed directly ({provider}).\n\nThe key identity is checked term by term, reference {}.\n\nThis completes the proof.",
            &h[..12]
        )
    }
}

/// Most proofs are judged correct; a few draw a dissenting vote from
/// `verifier-c` so that the ensemble disagrees on them.
fn verdict(provider: &str, prompt: &str) -> String {
    let h = sha256_hex(prompt);
    let mut correct = byte(&h, 0) % 4 != 0;
    if provider == "verifier-c" && prompt.contains("(model-b") && byte(&h, 1) % 10 == 0 {
        correct = !correct;
    }
    format!(
        "Checking each condition in turn.\n{{\"condition1_satisfied\": true, \"condition2_satisfied\": {correct}, \"condition3_satisfied\": true, \"condition4_satisfied\": true, \"proof_correct\": {correct}}}"
    )
}

#[async_trait]
impl Transport for ScriptedTransport {
    async fn send(
        &self,
        provider: &ProviderConfig,
        prompt: &Prompt,
        _params: &SamplingParams,
    ) -> Result<String, TransportError> {
        let id = provider.provider_id.as_str();
        Ok(if id.starts_with("verifier") {
            verdict(id, &prompt.user)
        } else {
            generation(id, &prompt.user)
        })
    }
}
