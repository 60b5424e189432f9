//! Content hashing over canonical JSON.
//!
//! `serde_json` serializes struct fields in declaration order and we only
//! hash types whose maps are `BTreeMap`s, so the byte stream is stable
//! across processes and platforms.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Full SHA-256 of the canonical JSON encoding of `value`.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("hashable values serialize");
    sha256_hex(&bytes)
}

/// First 16 hex digits of [`content_hash`], used for directory names.
pub fn short_hash<T: Serialize + ?Sized>(value: &T) -> String {
    content_hash(value)[..16].to_string()
}

/// Stable 64-bit seed derived from a string salt and a numeric seed.
pub fn salted_seed(salt: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update(seed.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}
