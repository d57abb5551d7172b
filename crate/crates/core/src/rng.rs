//! Counter-based randomness.
//!
//! Every random draw is a pure function of `(key, counter)`, so results do
//! not depend on how work is split across threads. Keys are derived from the
//! single configuration seed through named sub-streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the key of a named sub-stream, e.g. `("sampler", patch_index)`.
pub fn stream_key(seed: u64, label: &str, index: u64) -> u64 {
    // FNV-1a over the label keeps keys stable across platforms and releases.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    mix64(mix64(seed ^ h).wrapping_add(index.wrapping_mul(GOLDEN)))
}

/// 64 random bits for draw number `counter` of stream `key`.
#[inline]
pub fn counter_bits(key: u64, counter: u64) -> u64 {
    mix64(key ^ mix64(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn counter_uniform(key: u64, counter: u64) -> f64 {
    (counter_bits(key, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A conventional seeded generator for sequential use (synthetic data, weights).
pub fn seeded_rng(key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key)
}
