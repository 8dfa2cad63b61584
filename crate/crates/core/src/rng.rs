//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit
//! value obtained with [`mix64`]. The mixer is the SplitMix64 output function:
//! `mix64(seed, i)` is the `(i + 1)`-th output of a SplitMix64 generator
//! started at `seed`. Nesting it, e.g. `mix64(mix64(master, cell), trial)`,
//! yields independent-looking per-task seeds that do not depend on how the
//! tasks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer (Stafford variant 13).
pub fn finalize64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of sub-stream `index` from `seed`.
pub fn mix64(seed: u64, index: u64) -> u64 {
    finalize64(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// Folds a sequence of indices into `seed`, left to right.
pub fn mix64_path(seed: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(seed, |acc, &i| mix64(acc, i))
}

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed, index))
}

/// Sub-stream labels, kept in one place so that no two consumers share a stream.
pub(crate) mod streams {
    pub const CLEAN: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const ADVERSARY_INDICES: u64 = 3;
    pub const ADVERSARY_POINTS: u64 = 4;
    pub const MODEL_BASIS: u64 = 5;
    pub const STAGE1: u64 = 11;
    pub const STAGE2: u64 = 12;
    pub const CLASSIC: u64 = 13;
    pub const DIAGNOSTIC: u64 = 21;
}
