//! Division of shared non-negative integers with a fixed-point result.
//!
//! The denominator is normalized into [1/2, 1) with a secret power of two,
//! its reciprocal is found by Newton iteration from the linear start
//! 2.9142 - 2x, and a final remainder check makes the quotient exact:
//! the output is floor(2^f * a / b).

use crate::error::{Error, Result};
use crate::ring::RingConfig;
use crate::rss::binary::{a2b, and, b2a_word, BoolVec};
use crate::rss::trunc::sec_trunc;
use crate::rss::{mul, mul_many, sec_lt_many, ShareVec};
use crate::session::Party;

/// Public magnitude bounds: 0 <= a < 2^num_bits and 0 < b < 2^den_bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DivBounds {
    pub num_bits: u32,
    pub den_bits: u32,
}

/// Internal precision plan derived from the bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DivPlan {
    /// Fractional bits of the reciprocal.
    pub precision: u32,
    pub iterations: u32,
}

const NEWTON_CAP: u32 = 58;

impl DivBounds {
    pub fn plan(&self, ring: RingConfig, f: u32) -> Result<DivPlan> {
        let w = ring.width();
        let (num, den) = (self.num_bits, self.den_bits);
        if den == 0 || den >= w {
            return Err(Error::config(format!("denominator bound 2^{den} unusable in a {w}-bit ring")));
        }
        let budget = (w as i64) - 3 - num as i64 - den as i64;
        let precision = budget.min(NEWTON_CAP as i64);
        let needed = (num + f + 6).max(den) as i64;
        if precision < needed {
            return Err(Error::config(format!(
                "{w}-bit ring too small to divide {num}-bit by {den}-bit values with {f} fractional bits"
            )));
        }
        // Relative error of the start is below 2^-3.54; each step squares it.
        let mut iterations = 1u32;
        while 3.54 * f64::from(1u32 << iterations) < f64::from(num + f + 8) {
            iterations += 1;
        }
        let log_f = if f <= 1 { 1 } else { 32 - (f - 1).leading_zeros() };
        Ok(DivPlan {
            precision: precision as u32,
            iterations: iterations.max(log_f),
        })
    }
}

/// Bitwise OR, one round.
fn or(p: &mut Party, x: &BoolVec, y: &BoolVec) -> Result<BoolVec> {
    x.xor(y)?.xor(&and(p, x, y)?)
}

/// Shares of 2^{B-1-p} where p is the index of the top set bit of b.
fn normalizer(p: &mut Party, b: &ShareVec, den_bits: u32) -> Result<ShareVec> {
    let small = RingConfig::integer(den_bits)?;
    let bits = a2b(p, &b.downcast(small)?)?;
    let mut o = bits;
    let mut s = 1;
    while s < den_bits {
        let sh = o.shr(s);
        o = or(p, &o, &sh)?;
        s *= 2;
    }
    let onehot = o.xor(&o.shr(1))?;
    b2a_word(p, &onehot.reverse_bits(), b.ring())
}

/// floor(2^f * a / b) for shares of integers within `bounds`.
/// When b = 0 the output is an arbitrary bounded value.
pub fn sec_div(p: &mut Party, a: &ShareVec, b: &ShareVec, bounds: DivBounds, f: u32) -> Result<ShareVec> {
    Error::check_len(a.len(), b.len())?;
    let ring = a.ring();
    let plan = bounds.plan(ring, f)?;
    let big_f = plan.precision;
    let den = bounds.den_bits;
    let n = a.len();

    let m = normalizer(p, b, den)?;
    let prods = mul_many(p, &[(b, &m), (a, &m)])?;
    let (bn, am) = (&prods[0], &prods[1]);
    let b_f = bn.mul_scalar(ring.pow2(big_f - den));

    let start = (2.9142f64 * 2f64.powi(big_f as i32)).round() as u128;
    let mut w = b_f.mul_scalar(2).rsub_scalar(start);
    let two = ring.pow2(big_f + 1);
    for _ in 0..plan.iterations {
        let bw = mul(p, &b_f, &w)?;
        let e = sec_trunc(p, &bw, big_f)?.rsub_scalar(two);
        let we = mul(p, &w, &e)?;
        w = sec_trunc(p, &we, big_f)?;
    }
    // Keep the reciprocal strictly below 1/b so the estimate never overshoots.
    let w = w.add_scalar(ring.neg(4));

    let prod = mul(p, am, &w)?;
    let q0 = sec_trunc(p, &prod, big_f + den - f)?;

    // q0 is floor(2^f a / b) - 1, + 0 or + 1; fix it with the remainder.
    let rem = a.mul_scalar(ring.pow2(f)).sub(&mul(p, &q0, b)?)?;
    let zero = ShareVec::zeros(p.id(), ring, n);
    let c = sec_lt_many(p, &[(&rem, &zero), (&rem, b)])?;
    q0.sub(&c[0])?.sub(&c[1])?.add_scalar(1).with_ring(ring.with_frac(f)?)
}
