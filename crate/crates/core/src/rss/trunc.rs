//! Probabilistic truncation by a public shift, exact up to +1.

use crate::error::{Error, Result};
use crate::ring::{mask, RingConfig};
use crate::rss::binary::{b2a_word, random_bool, BoolVec};
use crate::rss::{reveal, sec_lt, ShareVec};
use crate::session::Party;
use crate::transport::Phase;

/// Correlated randomness for one truncation batch: a random word r and
/// arithmetic shares of r, of its top bit and of (r mod 2^{w-1}) >> c.
pub struct TruncPrep {
    pub shift: u32,
    pub r: ShareVec,
    pub r_msb: ShareVec,
    pub r_hi: ShareVec,
}

pub fn trunc_prep(p: &mut Party, n: usize, ring: RingConfig, shift: u32) -> Result<TruncPrep> {
    let w = ring.width();
    p.in_phase(Phase::Offline, |p| {
        let r = random_bool(p, n, w);
        let hi = r.and_public(mask(w - 1)).shr(shift);
        let top = r.shr(w - 1);
        let all = b2a_word(p, &BoolVec::concat(&[&r, &hi, &top])?, ring)?;
        let mut parts = all.chunks(3)?.into_iter();
        Ok(TruncPrep {
            shift,
            r: parts.next().unwrap(),
            r_hi: parts.next().unwrap(),
            r_msb: parts.next().unwrap(),
        })
    })
}

/// floor(x / 2^c) + e with e in {0, 1}, for |x| < 2^{w-2}.
pub fn sec_trunc(p: &mut Party, x: &ShareVec, c: u32) -> Result<ShareVec> {
    let ring = x.ring();
    let w = ring.width();
    if c == 0 {
        return Ok(x.clone());
    }
    if c >= w {
        return Err(Error::config(format!("shift {c} not below ring width {w}")));
    }
    if c == w - 1 {
        // |x| < 2^{w-2} so the quotient is 0 or -1.
        let zero = ShareVec::zeros(x.owner(), ring, x.len());
        return Ok(sec_lt(p, x, &zero)?.neg());
    }
    if w < 3 {
        return Err(Error::config("truncation needs a ring of at least 3 bits"));
    }
    let prep = trunc_prep(p, x.len(), ring, c)?;
    trunc_with(p, x, &prep)
}

pub fn trunc_with(p: &mut Party, x: &ShareVec, prep: &TruncPrep) -> Result<ShareVec> {
    let ring = x.ring();
    let w = ring.width();
    let c = prep.shift;
    let y = x.add_scalar(ring.pow2(w - 2));
    let opened = reveal(p, &y.add(&prep.r)?)?;
    let low = mask(w - 1);
    let cm: Vec<u128> = opened.iter().map(|v| ring.msb(*v)).collect();
    let q: Vec<u128> = opened.iter().map(|v| (v & low) >> c).collect();
    // v = c_msb xor r_msb, linear in r_msb since c_msb is public.
    let one_minus_2c: Vec<u128> = cm.iter().map(|b| ring.sub(1, ring.mul(2, *b))).collect();
    let v = prep.r_msb.mul_public(&one_minus_2c)?.add_public(&cm)?;
    v.mul_scalar(ring.pow2(w - 1 - c))
        .add_public(&q)?
        .sub(&prep.r_hi)?
        .add_scalar(ring.neg(ring.pow2(w - 2 - c)))
        .with_ring(ring)
}

/// Shift that a caller would apply after a fixed-point product.
pub fn trunc_fx(p: &mut Party, x: &ShareVec, ring: RingConfig) -> Result<ShareVec> {
    sec_trunc(p, x, ring.frac())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rss::testutil::run_on_inputs;
    use proptest::prelude::*;

    fn check(width: u32, xs: Vec<i128>, c: u32, seed: u64) {
        let ring = RingConfig::integer(width).unwrap();
        let enc: Vec<u128> = xs.iter().map(|v| ring.from_signed(*v)).collect();
        let (out, _) = run_on_inputs(seed, ring, &[enc], |p, v| Ok(vec![sec_trunc(p, &v[0], c)?]));
        for (x, got) in xs.iter().zip(&out[0]) {
            let fl = x.div_euclid(1i128 << c);
            let got = ring.to_signed(*got);
            assert!(got == fl || got == fl + 1, "x={x} c={c} got={got} floor={fl}");
        }
    }

    #[test]
    fn small_ring_all_values() {
        let xs: Vec<i128> = (-63..64).collect();
        for c in 0..8 {
            check(8, xs.clone(), c, c as u64);
        }
    }

    #[test]
    fn wide_ring() {
        check(128, vec![0, 1, -1, (1i128 << 125) - 1, -(1i128 << 125), 123456789], 60, 9);
    }

    #[test]
    fn shift_too_large_is_rejected() {
        let ring = RingConfig::integer(8).unwrap();
        let r = crate::session::run_session(&crate::session::SessionConfig::inproc(1), |p| {
            sec_trunc(p, &ShareVec::zeros(p.id(), ring, 1), 8)
        });
        assert!(r.is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn floor_plus_at_most_one(xs in prop::collection::vec(-(1i64 << 61)..(1i64 << 61), 1..16), c in 0u32..63, seed in any::<u64>()) {
            check(64, xs.into_iter().map(i128::from).collect(), c, seed);
        }
    }
}
