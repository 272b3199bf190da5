//! Deterministic seed derivation.
//!
//! Every random stream in the engine (sampler threads, per-block negative
//! draws, embedding init, evaluation splits) is seeded from the run seed plus
//! a role tag, so results depend only on configuration and never on thread
//! interleaving.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a sequence of tags into a new seed.
pub fn derive(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(mix64(base), |acc, &t| mix64(acc ^ mix64(t)))
}

/// A deterministic, platform-independent stream for the given seed and tags.
pub fn rng(base: u64, tags: &[u64]) -> ChaCha8Rng {
    rng_from(derive(base, tags))
}

/// Stream for an already-derived seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
