//! Seeded random streams.
//!
//! Every consumer draws from its own ChaCha8 stream selected by a text label,
//! so adding a new consumer never shifts the values another one sees. The
//! bounded sampling and shuffle below are written out rather than taken from
//! `rand` so that results stay fixed across library upgrades.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Name of the generator, echoed into run manifests.
pub const PRNG_NAME: &str = "chacha8/fnv1a-stream/lemire-fisher-yates";

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent stream for `label` under the root `seed`.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label));
    rng
}

/// Derives a child seed, e.g. one per generated clock network.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    stream(seed, label).next_u64()
}

/// Uniform integer in `0..bound` (Lemire's multiply-and-reject).
pub fn below(rng: &mut impl RngCore, bound: u64) -> u64 {
    assert!(bound > 0, "empty range");
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let m = (rng.next_u64() as u128) * (bound as u128);
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}

/// Uniform integer in the inclusive range `[lo, hi]`.
pub fn in_range(rng: &mut impl RngCore, lo: usize, hi: usize) -> usize {
    assert!(lo <= hi);
    lo + below(rng, (hi - lo) as u64 + 1) as usize
}

/// Fisher-Yates shuffle, walking from the back.
pub fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}
