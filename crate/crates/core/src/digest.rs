//! Content hashes used for config and data fingerprints.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the compact JSON encoding of `value`. Struct fields serialize in
/// declaration order, so equal values always hash equally.
pub fn json_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

/// Incremental hash over named byte blobs; names and lengths are mixed in so
/// that moving bytes between blobs changes the digest.
#[derive(Default)]
pub struct BlobHasher(Sha256);

impl BlobHasher {
    pub fn add(&mut self, name: &str, bytes: &[u8]) {
        self.0.update((name.len() as u64).to_le_bytes());
        self.0.update(name.as_bytes());
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}
