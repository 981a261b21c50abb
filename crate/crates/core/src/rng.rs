//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose 256-bit
//! key is derived from a user seed and a short path of integer keys, e.g.
//! `(NOISE, row)` or `(SCRAMBLE, replicate)`. The key is produced by running
//! SplitMix64 over the path, so any stream can be reconstructed without
//! touching any other one. This is what makes simulated data and scrambles
//! independent of how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keeping the streams of unrelated consumers apart.
pub mod tag {
    pub const LABELS: u64 = 1;
    pub const SIGNAL: u64 = 2;
    pub const PLACEMENT: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const TEST_LABELS: u64 = 5;
    pub const TEST_NOISE: u64 = 6;
    pub const SCRAMBLE: u64 = 7;
    pub const FOLDS: u64 = 8;
    pub const REPLICATE: u64 = 9;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Collapses `(seed, path...)` into one 64-bit value.
///
/// Used both for stream keys and for deriving per-replicate seeds that are
/// written into experiment reports.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut state = seed;
    let mut h = splitmix64(&mut state);
    for &k in path {
        state ^= k.wrapping_mul(0xD6E8_FEB8_6659_FD93).wrapping_add(h);
        h = splitmix64(&mut state);
    }
    h
}

/// A generator for the stream at `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = derive_seed(seed, path);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(stream(7, &[1, 2]), |r, _| Some(r.random()))
            .collect();
        let b: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(stream(7, &[1, 2]), |r, _| Some(r.random()))
            .collect();
        let c: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(stream(7, &[2, 1]), |r, _| Some(r.random()))
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn derive_seed_golden() {
        // Pinned: changing the derivation silently changes every simulation.
        assert_eq!(derive_seed(0, &[]), 0xE220_A839_7B1D_CDAF);
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[]));
        assert_ne!(derive_seed(1, &[0, 0]), derive_seed(1, &[0]));
    }
}
