//! Seed plumbing. Every random draw in the crate comes from a ChaCha8 stream
//! keyed by a user seed, so results are identical across platforms and
//! thread counts.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for sub-task `stream` of the run keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A fresh 64-bit seed for sub-task `stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    stream_rng(seed, stream).next_u64()
}
