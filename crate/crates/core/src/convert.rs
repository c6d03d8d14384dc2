//! Share conversion from a small ring Z_{2^k} to a large ring Z_{2^l} for
//! secrets in [0, 2^{k-1}).
//!
//! Party 0 knows d0 = x_0 + x_1 mod 2^k and party 1 knows d1 = x_2, so
//! x = d0 + d1 - ovfl with ovfl in {0, 2^k}. Both parties share their
//! part and its top-bit truncation on the large ring; the truncations sum
//! to floor(d / 2^{k-1}) plus an error bit, and since that floor is even
//! the error is the low bit of the sum, which a daBit unmasks.

use crate::error::{Error, Result};
use crate::ring::RingConfig;
use crate::rss::binary::{deal_bool_begin, deal_bool_end, BoolVec};
use crate::rss::{deal_begin, deal_end, mul, ShareVec};
use crate::session::{Key, Party};
use crate::transport::{next, prev, MsgWriter, Outbox, Phase, PartyId};

/// Random bits shared on Z_2 and on the large ring.
#[derive(Clone, Debug)]
pub struct DaBits {
    pub bits: BoolVec,
    pub arith: ShareVec,
}

/// Each party deals a random bit on both rings; the three are XORed,
/// locally on Z_2 and with two products on the large ring.
pub fn gen_dabits(p: &mut Party, n: usize, ring: RingConfig) -> Result<DaBits> {
    p.in_phase(Phase::Offline, |p| {
        let id = p.id();
        let mine: Vec<u128> = p.draw(Key::Local, n, 1);
        let mut msgs: Vec<MsgWriter> = (0..3).map(|_| MsgWriter::new()).collect();
        let mut bools = Vec::with_capacity(3);
        let mut ariths = Vec::with_capacity(3);
        for d in 0..3 {
            let v = (d == id).then_some(mine.as_slice());
            bools.push(deal_bool_begin(p, d, v, n, 1, &mut msgs[d])?);
            ariths.push(deal_begin(p, d, v, n, ring, &mut msgs[d])?);
        }
        let mut out = Outbox::new();
        out.send(next(id), msgs.swap_remove(id)).expect(prev(id));
        let mut inbox = p.exchange(out)?;
        let d = prev(id);
        let mut r = inbox.take(d)?;
        deal_bool_end(d, &mut bools[d], &mut r)?;
        deal_end(d, &mut ariths[d], &mut r)?;
        r.finish()?;

        let bits = bools[0].xor(&bools[1])?.xor(&bools[2])?;
        let x01 = xor_arith(p, &ariths[0], &ariths[1])?;
        let arith = xor_arith(p, &x01, &ariths[2])?;
        Ok(DaBits { bits, arith })
    })
}

/// a + b - 2ab for shared bits.
fn xor_arith(p: &mut Party, a: &ShareVec, b: &ShareVec) -> Result<ShareVec> {
    let ab = mul(p, a, b)?;
    a.add(b)?.sub(&ab.mul_scalar(2))
}

/// Source and target rings plus a pool of daBits, consumed in order.
pub struct ConversionContext {
    source: RingConfig,
    target: RingConfig,
    pool: Option<DaBits>,
    used: usize,
}

impl ConversionContext {
    pub fn new(source: RingConfig, target: RingConfig) -> Result<Self> {
        if source.width() >= target.width() {
            return Err(Error::config(format!(
                "conversion needs a larger target ring, got {} -> {}",
                source.width(),
                target.width()
            )));
        }
        Ok(ConversionContext {
            source,
            target,
            pool: None,
            used: 0,
        })
    }

    pub fn source(&self) -> RingConfig {
        self.source
    }

    pub fn target(&self) -> RingConfig {
        self.target
    }

    pub fn available(&self) -> usize {
        self.pool.as_ref().map_or(0, |d| d.arith.len()) - self.used
    }

    /// Appends `n` fresh daBits to the pool.
    pub fn fill(&mut self, p: &mut Party, n: usize) -> Result<()> {
        let fresh = gen_dabits(p, n, self.target)?;
        let pool = match self.pool.take() {
            None => fresh,
            Some(old) => {
                let rest = old.arith.len();
                DaBits {
                    bits: BoolVec::concat(&[&old.bits.slice(self.used..rest), &fresh.bits])?,
                    arith: ShareVec::concat(&[&old.arith.slice(self.used..rest), &fresh.arith])?,
                }
            }
        };
        self.pool = Some(pool);
        self.used = 0;
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<DaBits> {
        if self.available() < n {
            return Err(Error::Setup(format!(
                "daBit pool has {} bits, conversion needs {n}",
                self.available()
            )));
        }
        let pool = self.pool.as_ref().expect("checked above");
        let r = self.used..self.used + n;
        self.used += n;
        Ok(DaBits {
            bits: pool.bits.slice(r.clone()),
            arith: pool.arith.slice(r),
        })
    }
}

/// Party 0 truncates d0 to floor(d0 / 2^{k-1}); party 1 truncates d1 to
/// -((-d1) >> (k-1)) = ceil(d1 / 2^{k-1}).
fn trunc_part(id: PartyId, d: u128, k: u32) -> u128 {
    if id == 0 {
        d >> (k - 1)
    } else {
        d.div_ceil(1 << (k - 1))
    }
}

/// Converts shares of values in [0, 2^{k-1}) to the target ring. One
/// round; parties 0 and 1 each send 2l + 2 bits per element.
pub fn convert_share(p: &mut Party, x: &ShareVec, ctx: &mut ConversionContext) -> Result<ShareVec> {
    if x.ring().width() != ctx.source.width() {
        return Err(Error::RingMismatch(x.ring().width(), ctx.source.width()));
    }
    let n = x.len();
    let dabits = ctx.take(n)?;
    let (k, big) = (ctx.source.width(), ctx.target);
    let id = p.id();
    let src = x.ring();
    let (xa, xb) = x.components();

    // Party 0 holds (x_0, x_1), party 1 holds (x_1, x_2).
    let (ra, rb) = dabits.bits.components();
    let (mut dv, mut tv, mut masked) = (Vec::new(), Vec::new(), Vec::new());
    if id == 0 || id == 1 {
        for j in 0..n {
            let d = if id == 0 { src.add(xa[j], xb[j]) } else { xb[j] };
            let t = trunc_part(id, d, k);
            let mask = if id == 0 { ra[j] ^ rb[j] } else { rb[j] };
            dv.push(d);
            tv.push(t);
            masked.push((t & 1) ^ mask);
        }
    }

    let mut to_next = MsgWriter::new();
    let mut sh = Vec::with_capacity(4);
    for dealer in 0..2 {
        let mine = id == dealer;
        sh.push(deal_begin(p, dealer, mine.then_some(dv.as_slice()), n, big, &mut to_next)?);
        sh.push(deal_begin(p, dealer, mine.then_some(tv.as_slice()), n, big, &mut to_next)?);
    }
    let mut out = Outbox::new();
    match id {
        0 => {
            to_next.words(&masked, 1);
            let mut other = MsgWriter::new();
            other.words(&masked, 1);
            out.send(1, to_next).send(2, other).expect(1);
        }
        1 => {
            to_next.words(&masked, 1);
            let mut other = MsgWriter::new();
            other.words(&masked, 1);
            out.send(2, to_next).send(0, other).expect(0);
        }
        _ => {
            out.expect(0).expect(1);
        }
    }
    let mut inbox = p.exchange(out)?;
    let peer_bits = |from: PartyId, inbox: &mut crate::transport::Inbox, sh: &mut [ShareVec]| -> Result<Vec<u128>> {
        let mut r = inbox.take(from)?;
        if from == prev(id) {
            deal_end(from, &mut sh[2 * from], &mut r)?;
            deal_end(from, &mut sh[2 * from + 1], &mut r)?;
        }
        let bits = r.words(n, 1)?;
        r.finish()?;
        Ok(bits)
    };
    let (b0, b1) = match id {
        0 => (masked.clone(), peer_bits(1, &mut inbox, &mut sh)?),
        1 => (peer_bits(0, &mut inbox, &mut sh)?, masked.clone()),
        _ => {
            let b0 = peer_bits(0, &mut inbox, &mut sh)?;
            (b0, peer_bits(1, &mut inbox, &mut sh)?)
        }
    };
    let b: Vec<u128> = b0.iter().zip(&b1).map(|(u, v)| u ^ v).collect();

    let d = sh[0].add(&sh[2])?;
    let truncsum = sh[1].add(&sh[3])?;
    // bit = b + r - 2br with b public.
    let coef: Vec<u128> = b.iter().map(|v| big.sub(1, big.mul(2, *v))).collect();
    let bit = dabits.arith.mul_public(&coef)?.add_public(&b)?;
    let ovfl = truncsum.sub(&bit)?.mul_scalar(big.pow2(k - 1));
    d.sub(&ovfl)
}

/// The truncation identity behind the conversion, on plain integers:
/// value = (d0 >> c) + (-((-d1) >> c)) mod 2^l and
/// bit = value - floor((d0 + d1) / 2^c).
pub fn trunc_identity_check(d0: u128, d1: u128, c: u32, target: RingConfig) -> (u128, i128) {
    let neg = -(d1 as i128);
    let v = (d0 >> c) as i128 - (neg >> c);
    let exact = ((d0 + d1) >> c) as i128;
    (target.from_signed(v), v - exact)
}

/// Two-party conversion context. The daBits come from party 2 acting as a
/// trusted dealer, which is not secure in a real two-party deployment.
pub struct TwoPartyContext {
    source: RingConfig,
    target: RingConfig,
    bits: Vec<u128>,
    arith: Vec<u128>,
    used: usize,
}

impl TwoPartyContext {
    pub const INSECURE_DEALER: bool = true;

    pub fn new(source: RingConfig, target: RingConfig) -> Result<Self> {
        if source.width() >= target.width() {
            return Err(Error::config("conversion needs a larger target ring"));
        }
        Ok(TwoPartyContext {
            source,
            target,
            bits: Vec::new(),
            arith: Vec::new(),
            used: 0,
        })
    }

    pub fn available(&self) -> usize {
        self.arith.len() - self.used
    }

    /// Party 2 deals `n` daBits to parties 0 and 1. One offline round.
    pub fn fill(&mut self, p: &mut Party, n: usize) -> Result<()> {
        let id = p.id();
        let w = self.target.width();
        let t = self.target;
        p.in_phase(Phase::Offline, |p| {
            let mut out = Outbox::new();
            if id == 2 {
                let r = p.draw(Key::Local, n, 1);
                let s0 = p.draw(Key::Local, n, 1);
                let a0 = p.draw(Key::Local, n, w);
                let s1: Vec<u128> = r.iter().zip(&s0).map(|(r, s)| r ^ s).collect();
                let a1: Vec<u128> = r.iter().zip(&a0).map(|(r, a)| t.sub(*r, *a)).collect();
                let mut m0 = MsgWriter::new();
                m0.words(&s0, 1).ring(&a0, t);
                let mut m1 = MsgWriter::new();
                m1.words(&s1, 1).ring(&a1, t);
                out.send(0, m0).send(1, m1);
            } else {
                out.expect(2);
            }
            let mut inbox = p.exchange(out)?;
            if id != 2 {
                let mut r = inbox.take(2)?;
                let s = r.words(n, 1)?;
                let a = r.ring(n, t)?;
                r.finish()?;
                self.bits.drain(..self.used);
                self.arith.drain(..self.used);
                self.used = 0;
                self.bits.extend(s);
                self.arith.extend(a);
            }
            Ok(())
        })
    }
}

/// Converts additive two-party shares held by parties 0 and 1 (`x` is the
/// caller's share; party 2 passes an empty slice and gets one back).
/// One round with l + 1 bits in each direction per element.
pub fn convert_share_two_party(p: &mut Party, x: &[u128], n: usize, ctx: &mut TwoPartyContext) -> Result<Vec<u128>> {
    let id = p.id();
    if id == 2 {
        return Ok(Vec::new());
    }
    Error::check_len(n, x.len())?;
    if ctx.available() < n {
        return Err(Error::Setup(format!(
            "two-party daBit pool has {} bits, conversion needs {n}",
            ctx.available()
        )));
    }
    let (k, t, src) = (ctx.source.width(), ctx.target, ctx.source);
    let range = ctx.used..ctx.used + n;
    ctx.used += n;
    let rbits = &ctx.bits[range.clone()];
    let rar = &ctx.arith[range];

    let d: Vec<u128> = x.iter().map(|v| src.reduce(*v)).collect();
    let tr: Vec<u128> = d.iter().map(|v| trunc_part(id, *v, k)).collect();
    let masked: Vec<u128> = tr.iter().zip(rbits).map(|(v, r)| (v & 1) ^ r).collect();

    // Both parties draw the masks of party 0's values, then party 1's, from K_0.
    let key = if id == 0 { Key::Next } else { Key::Prev };
    let r0 = p.draw(key, 2 * n, t.width());
    let r1 = p.draw(key, 2 * n, t.width());
    let own: Vec<u128> = d.iter().chain(&tr).copied().collect();
    let (keep, send_mask) = if id == 0 { (&r0, &r0) } else { (&r1, &r1) };
    let sent: Vec<u128> = own.iter().zip(send_mask).map(|(v, r)| t.sub(*v, *r)).collect();
    let peer = 1 - id;
    let mut m = MsgWriter::new();
    m.ring(&sent, t).words(&masked, 1);
    let mut out = Outbox::new();
    out.send(peer, m).expect(peer);
    let mut inbox = p.exchange(out)?;
    let mut r = inbox.take(peer)?;
    let got = r.ring(2 * n, t)?;
    let peer_masked = r.words(n, 1)?;
    r.finish()?;

    Ok((0..n)
        .map(|j| {
            let (dj, tj) = (
                t.add(keep[j], got[j]),
                t.add(keep[n + j], got[n + j]),
            );
            let b = masked[j] ^ peer_masked[j];
            // Party 0 adds the public b once.
            let bit = t.add(
                t.mul(rar[j], t.sub(1, t.mul(2, b))),
                if id == 0 { b } else { 0 },
            );
            let ovfl = t.mul(t.sub(tj, bit), t.pow2(k - 1));
            t.sub(dj, ovfl)
        })
        .collect())
}
