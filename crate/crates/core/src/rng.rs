//! Seeded random streams.
//!
//! Every stochastic operation draws from [`ChaCha8Rng`] seeded through
//! [`seeded`]. ChaCha8 is a fully specified stream cipher, so the streams are
//! portable across platforms and reproducible by any implementation of the
//! same algorithm. Parallel work derives per-item streams with
//! [`derive_seed`] so results do not depend on scheduling.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finaliser over `seed` and `index`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
