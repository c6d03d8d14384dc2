//! Fixtures shared by the benchmarks.

use rsstree_core::rss::input;
use rsstree_core::{Party, RingConfig, Result, ShareVec};

/// Shares `values` from party 0.
pub fn share(p: &mut Party, values: &[u128], ring: RingConfig) -> Result<ShareVec> {
    input(p, 0, (p.id() == 0).then_some(values), values.len(), ring)
}

/// A deterministic pseudo-random vector of `n` values below 2^bits.
pub fn values(n: usize, bits: u32, seed: u64) -> Vec<u128> {
    let mut x = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    (0..n)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            u128::from(x) & ((1u128 << bits) - 1)
        })
        .collect()
}
