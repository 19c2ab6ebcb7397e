//! Counter-style random streams.
//!
//! Every random draw in the library comes from a stream identified by a
//! `(master seed, purpose tag, index)` triple. The triple is hashed into a
//! ChaCha seed, so streams are independent of evaluation order and can be
//! handed out to parallel workers without coordination.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Random generator type backing every stream.
pub type StreamRng = ChaCha8Rng;

/// Build the stream for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: &str, index: u64) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Two-level index helper for streams keyed by e.g. `(epoch, batch)`.
pub fn pair_index(major: u64, minor: u64) -> u64 {
    (major << 32) ^ minor
}
