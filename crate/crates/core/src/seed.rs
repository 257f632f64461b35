//! Seed derivation and row hashing.
//!
//! Everything random in the crate is driven by `ChaCha8Rng` seeded from a
//! `u64`. Child seeds are derived with SplitMix64 so that independent
//! sub-tasks (trees, sweep cells, sub-explainers) get decorrelated streams
//! regardless of the order they run in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a stream tag. Results keep the
/// top bit clear so every recorded seed is a valid TOML integer.
pub fn derive(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93)) >> 1
}

/// Stable hash of a feature row's bit pattern; `-0.0` and `0.0` hash equal.
pub fn hash_row(row: &[f64], seed: u64) -> u64 {
    let mut h = splitmix64(seed ^ 0x5851_F42D_4C95_7F2D);
    for &v in row {
        let bits = if v == 0.0 { 0 } else { v.to_bits() };
        h = splitmix64(h ^ bits);
    }
    h
}

/// Map a hash to a uniform value in [0, 1).
pub fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
