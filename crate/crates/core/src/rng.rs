//! Seeded random streams.
//!
//! Every consumer of randomness derives its own ChaCha8 stream from the run
//! seed and a short path of integers (`[domain, epoch, batch, ...]`). The
//! path is folded with SplitMix64, so streams are independent of each other
//! and of call order, and sequences are identical on every platform.

use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Stream domains. Kept as constants so the mapping is stable across releases.
pub mod domain {
    pub const WEIGHTED_EPOCH: u64 = 1;
    pub const UNWEIGHTED_EPOCH: u64 = 2;
    pub const MIXUP: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SYNTHETIC_MEANS: u64 = 5;
    pub const SYNTHETIC_NOISE: u64 = 6;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `seed` and `path` into a single 64-bit stream key.
pub fn stream_key(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// A ChaCha8 generator for the stream addressed by `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_key(seed, path))
}
