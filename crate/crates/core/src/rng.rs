//! Seeded random streams.
//!
//! Every stochastic operation takes an explicit generator. Parallelizable
//! work (one distance, one training iteration) draws from its own substream
//! whose seed depends only on the master seed and the work-item index, so
//! results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha12Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `index` under `seed`.
pub fn substream_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Seed for a substream addressed by a path of indices, e.g. `[iteration, epoch]`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &i| substream_seed(s, i))
}

pub fn substream(seed: u64, index: u64) -> SimRng {
    rng_from_seed(substream_seed(seed, index))
}
