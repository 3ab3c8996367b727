//! Deterministic seeds and identifiers.
//!
//! `derive_seed(namespace, key)` is defined as
//!
//! ```text
//! digest = SHA-256( F("qpc/seed/v1") || F(namespace) || F(key) )
//! seed   = first 8 bytes of digest read as a big-endian u64
//! ```
//!
//! where `F(s)` is the UTF-8 byte length of `s` as a little-endian u64
//! followed by the bytes of `s`. The length prefix keeps `("a","b")` and
//! `("ab","")` apart.
//!
//! Multi-part keys (`derive_seed_parts`) are encoded into a single key by
//! writing each part as `<decimal byte length>:<part>` back to back.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

const SEED_DOMAIN: &str = "qpc/seed/v1";

fn frame(hasher: &mut Sha256, bytes: &[u8]) {
    hasher.update((bytes.len() as u64).to_le_bytes());
    hasher.update(bytes);
}

pub fn derive_seed(namespace: &str, key: &str) -> u64 {
    let mut hasher = Sha256::new();
    frame(&mut hasher, SEED_DOMAIN.as_bytes());
    frame(&mut hasher, namespace.as_bytes());
    frame(&mut hasher, key.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(head)
}

pub fn encode_parts(parts: &[&str]) -> String {
    let mut key = String::new();
    for part in parts {
        key.push_str(&part.len().to_string());
        key.push(':');
        key.push_str(part);
    }
    key
}

pub fn derive_seed_parts(namespace: &str, parts: &[&str]) -> u64 {
    derive_seed(namespace, &encode_parts(parts))
}

/// Lowercase hex SHA-256 of a text.
pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn sha256_bytes_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `ceil(ratio * count)` with a small tolerance so that products such as
/// `0.3 * 10 = 3.0000000000000004` round to the intended integer.
pub fn ceil_ratio(ratio: f64, count: usize) -> usize {
    let product = ratio * count as f64;
    (product - 1e-9).ceil().max(0.0) as usize
}

/// A 64-bit seed, serialized as 16 lowercase hex characters so it survives
/// JSON consumers that only have doubles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Seed(pub u64);

impl Seed {
    pub fn derive(namespace: &str, parts: &[&str]) -> Self {
        Seed(derive_seed_parts(namespace, parts))
    }

    pub fn hex(self) -> String {
        format!("{:016x}", self.0)
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

impl std::str::FromStr for Seed {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u64::from_str_radix(s, 16).map(Seed)
    }
}

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.hex())
    }
}

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Item id: the derived seed over (question, method, model, proof hash) as 16 hex chars.
pub fn item_id(question_id: &str, method: &str, model: Option<&str>, proof: &str) -> String {
    Seed::derive(
        "item",
        &[
            question_id,
            method,
            model.unwrap_or("-"),
            &sha256_hex(proof),
        ],
    )
    .hex()
}
