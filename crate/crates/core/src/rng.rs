//! Seeded random streams.
//!
//! Every stage of a pipeline draws from its own stream, keyed by
//! `(seed, stage name)` through SHA-256, so adding or reordering stages never
//! shifts the randomness of another stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64, stage: &str) -> Stream {
    Stream::from_seed(derive_key(seed, stage))
}

/// Derives a child seed, for handing a sub-computation its own seed value.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let key = derive_key(seed, stage);
    u64::from_le_bytes(key[..8].try_into().unwrap())
}

fn derive_key(seed: u64, stage: &str) -> [u8; 32] {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(stage.as_bytes())
        .finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(digest.as_slice());
    key
}
