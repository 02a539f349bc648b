//! Seed derivation and RNG streams.
//!
//! Per-trajectory seeds come from [`derive_seed`]:
//!
//! ```text
//! z = base + (index + 1) * 0x9E37_79B9_7F4A_7C15      (wrapping)
//! z = (z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9         (wrapping)
//! z = (z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB         (wrapping)
//! seed = z ^ (z >> 31)
//! ```
//!
//! i.e. the SplitMix64 output function applied to the `index + 1`-th state of
//! a SplitMix64 sequence started at `base`. Every seed then feeds ChaCha8
//! generators; the regime path and the Brownian increments use distinct
//! ChaCha stream ids of the same key, so both are reproducible and
//! independent of each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// 64-bit avalanche mix of `(base, index)`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id used for regime-path sampling.
pub const CHAIN_STREAM: u64 = 0;
/// Stream id used for Brownian increments.
pub const BROWNIAN_STREAM: u64 = 1;

pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derive_seed_matches_splitmix_reference() {
        // Reference outputs of SplitMix64 seeded with 0 (first three draws).
        assert_eq!(derive_seed(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(derive_seed(0, 1), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(derive_seed(0, 2), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let mut seen: Vec<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 1000);
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream(7, CHAIN_STREAM).random();
        let b: u64 = stream(7, BROWNIAN_STREAM).random();
        assert_ne!(a, b);
        let c: u64 = stream(7, CHAIN_STREAM).random();
        assert_eq!(a, c);
    }
}
