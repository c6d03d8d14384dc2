//! Secure comparison and equality over the full signed range.

use crate::error::Result;
use crate::ring::mask;
use crate::rss::binary::{a2b, and, b2a_bits, BoolVec};
use crate::rss::ShareVec;
use crate::session::Party;

/// [a < b] for signed a, b anywhere in the ring, including the extreme
/// values. Uses the sign bits of a, b and a - b:
/// lt = sd ^ ((sa ^ sb) & (sa ^ sd)).
pub fn sec_lt(p: &mut Party, a: &ShareVec, b: &ShareVec) -> Result<ShareVec> {
    Ok(sec_lt_many(p, &[(a, b)])?.remove(0))
}

/// Independent comparisons sharing the same rounds.
pub fn sec_lt_many(p: &mut Party, pairs: &[(&ShareVec, &ShareVec)]) -> Result<Vec<ShareVec>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let ring = pairs[0].0.ring();
    let w = ring.width();
    let lens: Vec<usize> = pairs.iter().map(|(a, _)| a.len()).collect();
    let a: Vec<&ShareVec> = pairs.iter().map(|(a, _)| *a).collect();
    let b: Vec<&ShareVec> = pairs.iter().map(|(_, b)| *b).collect();
    let a = ShareVec::concat(&a)?;
    let b = ShareVec::concat(&b)?;
    let d = a.sub(&b)?;
    let n = a.len();
    let all = a2b(p, &ShareVec::concat(&[&a, &b, &d])?)?;
    let signs = all.bit(w - 1);
    let sa = signs.slice(0..n);
    let sb = signs.slice(n..2 * n);
    let sd = signs.slice(2 * n..3 * n);
    let t = and(p, &sa.xor(&sb)?, &sa.xor(&sd)?)?;
    let lt = sd.xor(&t)?;
    b2a_bits(p, &lt, ring)?.split(&lens)
}

/// Independent equality tests sharing the same rounds.
pub fn sec_eq_many(p: &mut Party, pairs: &[(&ShareVec, &ShareVec)]) -> Result<Vec<ShareVec>> {
    let lens: Vec<usize> = pairs.iter().map(|(a, _)| a.len()).collect();
    if lens.iter().sum::<usize>() == 0 {
        return Ok(pairs.iter().map(|(a, _)| ShareVec::zeros(a.owner(), a.ring(), 0)).collect());
    }
    let a: Vec<&ShareVec> = pairs.iter().map(|(a, _)| *a).collect();
    let b: Vec<&ShareVec> = pairs.iter().map(|(_, b)| *b).collect();
    sec_eq(p, &ShareVec::concat(&a)?, &ShareVec::concat(&b)?)?.split(&lens)
}

/// [a == b].
pub fn sec_eq(p: &mut Party, a: &ShareVec, b: &ShareVec) -> Result<ShareVec> {
    let w = a.ring().width();
    let d = a2b(p, &a.sub(b)?)?;
    let full = w.next_power_of_two();
    let mut z: BoolVec = d.not().resize(full).xor_public(mask(full) ^ mask(w));
    let mut s = full / 2;
    while s >= 1 {
        z = and(p, &z, &z.shr(s))?;
        s /= 2;
    }
    b2a_bits(p, &z.bit(0), a.ring())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::RingConfig;
    use crate::rss::testutil::run_on_inputs;
    use proptest::prelude::*;

    fn check(width: u32, a: Vec<u128>, b: Vec<u128>, seed: u64) {
        let ring = RingConfig::integer(width).unwrap();
        let a: Vec<u128> = a.into_iter().map(|v| ring.reduce(v)).collect();
        let b: Vec<u128> = b.into_iter().map(|v| ring.reduce(v)).collect();
        let (out, _) = run_on_inputs(seed, ring, &[a.clone(), b.clone()], |p, xs| {
            Ok(vec![sec_lt(p, &xs[0], &xs[1])?, sec_eq(p, &xs[0], &xs[1])?])
        });
        for j in 0..a.len() {
            let lt = (ring.to_signed(a[j]) < ring.to_signed(b[j])) as u128;
            assert_eq!(out[0][j], lt, "lt {} {}", a[j], b[j]);
            assert_eq!(out[1][j], (a[j] == b[j]) as u128, "eq {} {}", a[j], b[j]);
        }
    }

    #[test]
    fn extremes_of_the_signed_range() {
        let min = 1u128 << 31;
        let max = min - 1;
        check(
            32,
            vec![min, max, min, 0, 0xFFFF_FFFF, 5, min],
            vec![max, min, 0, min, 0, 5, min],
            1,
        );
    }

    #[test]
    fn odd_widths() {
        check(5, (0..32).collect(), (0..32).rev().collect(), 2);
        check(128, vec![0, 1u128 << 127, u128::MAX], vec![u128::MAX, 0, 1u128 << 127], 3);
    }

    #[test]
    fn exhaustive_four_bits() {
        let a: Vec<u128> = (0..256).map(|i| i / 16).collect();
        let b: Vec<u128> = (0..256).map(|i| i % 16).collect();
        check(4, a, b, 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn matches_signed_order(a in prop::collection::vec(any::<u32>(), 8), b in prop::collection::vec(any::<u32>(), 8), seed in any::<u64>()) {
            let mut b: Vec<u128> = b.into_iter().map(u128::from).collect();
            b[0] = a[0] as u128;
            check(32, a.into_iter().map(u128::from).collect(), b, seed);
        }
    }
}
