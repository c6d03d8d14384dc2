//! Replicated secret sharing over Z_{2^w}.
//!
//! A value x = x_0 + x_1 + x_2 is held so that party i knows (x_i, x_{i+1}).
//! Local operations are linear; multiplication, comparison, truncation and
//! division interact.

pub mod binary;
pub mod compare;
pub mod div;
pub mod trunc;

use crate::error::{Error, Result};
use crate::ring::RingConfig;
use crate::session::{Key, Party};
use crate::transport::{next, prev, MsgReader, MsgWriter, Outbox, PartyId, N_PARTIES};

pub use compare::{sec_eq, sec_eq_many, sec_lt, sec_lt_many};
pub use div::{sec_div, DivBounds};
pub use trunc::sec_trunc;

/// One party's view of a vector of shared ring elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareVec {
    ring: RingConfig,
    owner: PartyId,
    a: Vec<u128>,
    b: Vec<u128>,
}

/// A single shared element, as held by one party.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepShare {
    pub first: u128,
    pub second: u128,
}

impl ShareVec {
    /// Party `owner`'s share with components (x_owner, x_{owner+1}).
    pub fn from_components(owner: PartyId, ring: RingConfig, a: Vec<u128>, b: Vec<u128>) -> Result<Self> {
        Error::check_len(a.len(), b.len())?;
        if owner >= N_PARTIES {
            return Err(Error::config(format!("party id {owner} out of range")));
        }
        let a = a.into_iter().map(|v| ring.reduce(v)).collect();
        let b = b.into_iter().map(|v| ring.reduce(v)).collect();
        Ok(ShareVec { ring, owner, a, b })
    }

    pub fn zeros(owner: PartyId, ring: RingConfig, n: usize) -> Self {
        ShareVec {
            ring,
            owner,
            a: vec![0; n],
            b: vec![0; n],
        }
    }

    /// Trivial sharing of a public vector: the value sits in component 0.
    pub fn public(owner: PartyId, ring: RingConfig, values: &[u128]) -> Self {
        let mut s = Self::zeros(owner, ring, values.len());
        let v: Vec<u128> = values.iter().map(|x| ring.reduce(*x)).collect();
        match owner {
            0 => s.a = v,
            2 => s.b = v,
            _ => {}
        }
        s
    }

    pub fn constant(owner: PartyId, ring: RingConfig, value: u128, n: usize) -> Self {
        Self::public(owner, ring, &vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn ring(&self) -> RingConfig {
        self.ring
    }

    pub fn owner(&self) -> PartyId {
        self.owner
    }

    pub fn get(&self, i: usize) -> RepShare {
        RepShare {
            first: self.a[i],
            second: self.b[i],
        }
    }

    /// Components (x_owner, x_{owner+1}).
    pub fn components(&self) -> (&[u128], &[u128]) {
        (&self.a, &self.b)
    }

    /// Component `j` if this party holds it.
    pub fn component(&self, j: PartyId) -> Option<&[u128]> {
        if j == self.owner {
            Some(&self.a)
        } else if j == next(self.owner) {
            Some(&self.b)
        } else {
            None
        }
    }

    fn compatible(&self, o: &ShareVec) -> Result<()> {
        if self.ring.width() != o.ring.width() {
            return Err(Error::RingMismatch(self.ring.width(), o.ring.width()));
        }
        if self.owner != o.owner {
            return Err(Error::config("shares belong to different parties"));
        }
        Error::check_len(self.len(), o.len())
    }

    fn zip_with(&self, o: &ShareVec, f: impl Fn(u128, u128) -> u128) -> Result<ShareVec> {
        self.compatible(o)?;
        Ok(ShareVec {
            ring: self.ring,
            owner: self.owner,
            a: self.a.iter().zip(&o.a).map(|(x, y)| f(*x, *y)).collect(),
            b: self.b.iter().zip(&o.b).map(|(x, y)| f(*x, *y)).collect(),
        })
    }

    fn map(&self, f: impl Fn(u128) -> u128) -> ShareVec {
        ShareVec {
            ring: self.ring,
            owner: self.owner,
            a: self.a.iter().map(|x| f(*x)).collect(),
            b: self.b.iter().map(|x| f(*x)).collect(),
        }
    }

    pub fn add(&self, o: &ShareVec) -> Result<ShareVec> {
        let r = self.ring;
        self.zip_with(o, |x, y| r.add(x, y))
    }

    pub fn sub(&self, o: &ShareVec) -> Result<ShareVec> {
        let r = self.ring;
        self.zip_with(o, |x, y| r.sub(x, y))
    }

    pub fn neg(&self) -> ShareVec {
        let r = self.ring;
        self.map(|x| r.neg(x))
    }

    pub fn mul_scalar(&self, c: u128) -> ShareVec {
        let r = self.ring;
        self.map(|x| r.mul(x, c))
    }

    /// Elementwise product with a public vector.
    pub fn mul_public(&self, c: &[u128]) -> Result<ShareVec> {
        Error::check_len(self.len(), c.len())?;
        let r = self.ring;
        Ok(ShareVec {
            ring: r,
            owner: self.owner,
            a: self.a.iter().zip(c).map(|(x, y)| r.mul(*x, *y)).collect(),
            b: self.b.iter().zip(c).map(|(x, y)| r.mul(*x, *y)).collect(),
        })
    }

    pub fn add_public(&self, c: &[u128]) -> Result<ShareVec> {
        Error::check_len(self.len(), c.len())?;
        self.add(&ShareVec::public(self.owner, self.ring, c))
    }

    pub fn add_scalar(&self, c: u128) -> ShareVec {
        let r = self.ring;
        let mut out = self.clone();
        match self.owner {
            0 => out.a.iter_mut().for_each(|x| *x = r.add(*x, c)),
            2 => out.b.iter_mut().for_each(|x| *x = r.add(*x, c)),
            _ => {}
        }
        out
    }

    /// c - x for a public scalar c.
    pub fn rsub_scalar(&self, c: u128) -> ShareVec {
        self.neg().add_scalar(c)
    }

    /// Inclusive prefix sums.
    pub fn prefix_sum(&self) -> ShareVec {
        self.prefix_sum_blocks(self.len().max(1))
    }

    /// Inclusive prefix sums restarting every `block` elements.
    pub fn prefix_sum_blocks(&self, block: usize) -> ShareVec {
        let r = self.ring;
        let scan = |v: &[u128]| {
            let mut out = Vec::with_capacity(v.len());
            let mut acc = 0u128;
            for (i, x) in v.iter().enumerate() {
                if i % block == 0 {
                    acc = 0;
                }
                acc = r.add(acc, *x);
                out.push(acc);
            }
            out
        };
        ShareVec {
            ring: r,
            owner: self.owner,
            a: scan(&self.a),
            b: scan(&self.b),
        }
    }

    /// Sum of each block of `block` elements.
    pub fn block_sums(&self, block: usize) -> ShareVec {
        let r = self.ring;
        let sum = |v: &[u128]| v.chunks(block).map(|c| c.iter().fold(0, |s, x| r.add(s, *x))).collect();
        ShareVec {
            ring: r,
            owner: self.owner,
            a: sum(&self.a),
            b: sum(&self.b),
        }
    }

    /// out[i] = self[idx[i]].
    pub fn gather(&self, idx: &[usize]) -> ShareVec {
        ShareVec {
            ring: self.ring,
            owner: self.owner,
            a: idx.iter().map(|&i| self.a[i]).collect(),
            b: idx.iter().map(|&i| self.b[i]).collect(),
        }
    }

    pub fn reverse(&self) -> ShareVec {
        let mut out = self.clone();
        out.a.reverse();
        out.b.reverse();
        out
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> ShareVec {
        ShareVec {
            ring: self.ring,
            owner: self.owner,
            a: self.a[range.clone()].to_vec(),
            b: self.b[range].to_vec(),
        }
    }

    pub fn concat(parts: &[&ShareVec]) -> Result<ShareVec> {
        let first = parts
            .first()
            .ok_or_else(|| Error::config("cannot concatenate zero vectors"))?;
        let mut out = ShareVec::zeros(first.owner, first.ring, 0);
        for p in parts {
            if p.ring.width() != first.ring.width() {
                return Err(Error::RingMismatch(first.ring.width(), p.ring.width()));
            }
            out.a.extend_from_slice(&p.a);
            out.b.extend_from_slice(&p.b);
        }
        Ok(out)
    }

    pub fn split(&self, lens: &[usize]) -> Result<Vec<ShareVec>> {
        Error::check_len(self.len(), lens.iter().sum())?;
        let mut out = Vec::with_capacity(lens.len());
        let mut at = 0;
        for &l in lens {
            out.push(self.slice(at..at + l));
            at += l;
        }
        Ok(out)
    }

    /// Splits into `k` equal parts.
    pub fn chunks(&self, k: usize) -> Result<Vec<ShareVec>> {
        if k == 0 || !self.len().is_multiple_of(k) {
            return Err(Error::config(format!("cannot cut {} elements into {k} parts", self.len())));
        }
        self.split(&vec![self.len() / k; k])
    }

    /// The vector repeated `times` times.
    pub fn repeat(&self, times: usize) -> ShareVec {
        ShareVec {
            ring: self.ring,
            owner: self.owner,
            a: self.a.repeat(times),
            b: self.b.repeat(times),
        }
    }

    /// Reinterprets the components in another ring by local reduction.
    pub fn downcast(&self, ring: RingConfig) -> Result<ShareVec> {
        if ring.width() > self.ring.width() {
            return Err(Error::config(format!(
                "cannot downcast {}-bit shares to {} bits",
                self.ring.width(),
                ring.width()
            )));
        }
        Ok(ShareVec {
            ring,
            owner: self.owner,
            a: self.a.iter().map(|x| ring.reduce(*x)).collect(),
            b: self.b.iter().map(|x| ring.reduce(*x)).collect(),
        })
    }

    /// Same components, different fixed-point annotation.
    pub fn with_ring(mut self, ring: RingConfig) -> Result<ShareVec> {
        if ring.width() != self.ring.width() {
            return Err(Error::RingMismatch(self.ring.width(), ring.width()));
        }
        self.ring = ring;
        Ok(self)
    }
}

/// Reconstructs values from all three parties' shares, checking that the
/// replicated components agree.
pub fn reconstruct(shares: &[ShareVec]) -> Result<Vec<u128>> {
    if shares.len() != N_PARTIES {
        return Err(Error::config("need exactly three shares"));
    }
    let mut by_owner: [Option<&ShareVec>; N_PARTIES] = [None; N_PARTIES];
    for s in shares {
        by_owner[s.owner] = Some(s);
    }
    let s: Vec<&ShareVec> = by_owner
        .iter()
        .map(|s| s.ok_or_else(|| Error::config("shares must come from parties 0, 1 and 2")))
        .collect::<Result<_>>()?;
    let ring = s[0].ring;
    for i in 0..N_PARTIES {
        Error::check_len(s[0].len(), s[i].len())?;
        if s[i].b != s[next(i)].a {
            return Err(Error::Integrity(format!(
                "component {} differs between parties {i} and {}",
                next(i),
                next(i)
            )));
        }
    }
    Ok((0..s[0].len())
        .map(|j| ring.add(ring.add(s[0].a[j], s[1].a[j]), s[2].a[j]))
        .collect())
}

/// Additive shares of zero: PRG(K_i) - PRG(K_{i-1}).
pub fn zero_share(p: &mut Party, n: usize, ring: RingConfig) -> Vec<u128> {
    let x = p.draw(Key::Next, n, ring.width());
    let y = p.draw(Key::Prev, n, ring.width());
    x.iter().zip(&y).map(|(a, b)| ring.sub(*a, *b)).collect()
}

/// A uniformly random shared vector, no interaction.
pub fn random(p: &mut Party, n: usize, ring: RingConfig) -> ShareVec {
    let a = p.draw(Key::Prev, n, ring.width());
    let b = p.draw(Key::Next, n, ring.width());
    ShareVec {
        ring,
        owner: p.id(),
        a,
        b,
    }
}

/// First half of dealer sharing. The dealer writes the component for party
/// dealer+1 into `msg`; that party completes its share with [`deal_end`].
pub(crate) fn deal_begin(
    p: &mut Party,
    dealer: PartyId,
    values: Option<&[u128]>,
    n: usize,
    ring: RingConfig,
    msg: &mut MsgWriter,
) -> Result<ShareVec> {
    let id = p.id();
    let mut s = ShareVec::zeros(id, ring, n);
    if id == dealer {
        let v = values.ok_or_else(|| Error::config(format!("dealer {dealer} has no input")))?;
        Error::check_len(n, v.len())?;
        let r = p.draw(Key::Prev, n, ring.width());
        let x: Vec<u128> = v.iter().zip(&r).map(|(v, r)| ring.sub(*v, *r)).collect();
        msg.ring(&x, ring);
        s.a = r;
        s.b = x;
    } else if id == prev(dealer) {
        s.b = p.draw(Key::Next, n, ring.width());
    }
    Ok(s)
}

pub(crate) fn deal_end(dealer: PartyId, s: &mut ShareVec, r: &mut MsgReader) -> Result<()> {
    if s.owner == next(dealer) {
        s.a = r.ring(s.len(), s.ring)?;
    }
    Ok(())
}

/// Shares `values` held by `dealer`; other parties pass `None`. One round.
pub fn input(
    p: &mut Party,
    dealer: PartyId,
    values: Option<&[u128]>,
    n: usize,
    ring: RingConfig,
) -> Result<ShareVec> {
    let mut msg = MsgWriter::new();
    let mut s = deal_begin(p, dealer, values, n, ring, &mut msg)?;
    let mut out = Outbox::new();
    let id = p.id();
    if id == dealer {
        out.send(next(dealer), msg);
    } else if id == next(dealer) {
        out.expect(dealer);
    }
    let mut inbox = p.exchange(out)?;
    if id == next(dealer) {
        let mut r = inbox.take(dealer)?;
        deal_end(dealer, &mut s, &mut r)?;
        r.finish()?;
    }
    Ok(s)
}

/// Local part of a product: additive share z_i plus a zero share.
fn mul_local(p: &mut Party, x: &ShareVec, y: &ShareVec) -> Result<Vec<u128>> {
    x.compatible(y)?;
    let r = x.ring;
    let alpha = zero_share(p, x.len(), r);
    Ok((0..x.len())
        .map(|j| {
            let t = r.mul(x.a[j], y.a[j])
                .wrapping_add(r.mul(x.a[j], y.b[j]))
                .wrapping_add(r.mul(x.b[j], y.a[j]))
                .wrapping_add(alpha[j]);
            r.reduce(t)
        })
        .collect())
}

/// Reshares additive shares z_i into replicated form. One round.
fn reshare(p: &mut Party, z: Vec<u128>, ring: RingConfig) -> Result<ShareVec> {
    let id = p.id();
    let mut m = MsgWriter::new();
    m.ring(&z, ring);
    let mut out = Outbox::new();
    out.send(prev(id), m).expect(next(id));
    let mut inbox = p.exchange(out)?;
    let mut r = inbox.take(next(id))?;
    let b = r.ring(z.len(), ring)?;
    r.finish()?;
    Ok(ShareVec { ring, owner: id, a: z, b })
}

/// Elementwise product. One round, w bits per party per element.
pub fn mul(p: &mut Party, x: &ShareVec, y: &ShareVec) -> Result<ShareVec> {
    let z = mul_local(p, x, y)?;
    reshare(p, z, x.ring)
}

/// Several independent products in a single round.
pub fn mul_many(p: &mut Party, pairs: &[(&ShareVec, &ShareVec)]) -> Result<Vec<ShareVec>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let xs: Vec<&ShareVec> = pairs.iter().map(|(x, _)| *x).collect();
    let ys: Vec<&ShareVec> = pairs.iter().map(|(_, y)| *y).collect();
    let lens: Vec<usize> = xs.iter().map(|x| x.len()).collect();
    let z = mul(p, &ShareVec::concat(&xs)?, &ShareVec::concat(&ys)?)?;
    z.split(&lens)
}

/// Opens `x` to every party. One round.
pub fn reveal(p: &mut Party, x: &ShareVec) -> Result<Vec<u128>> {
    let id = p.id();
    let mut m = MsgWriter::new();
    m.ring(&x.b, x.ring);
    let mut out = Outbox::new();
    out.send(prev(id), m).expect(next(id));
    let mut inbox = p.exchange(out)?;
    let mut r = inbox.take(next(id))?;
    let c = r.ring(x.len(), x.ring)?;
    r.finish()?;
    let ring = x.ring;
    Ok((0..x.len())
        .map(|j| ring.add(ring.add(x.a[j], x.b[j]), c[j]))
        .collect())
}

/// Opens `x` to party `to` only. One round.
pub fn reveal_to(p: &mut Party, x: &ShareVec, to: PartyId) -> Result<Option<Vec<u128>>> {
    let id = p.id();
    let mut out = Outbox::new();
    if id == next(to) {
        let mut m = MsgWriter::new();
        m.ring(&x.b, x.ring);
        out.send(to, m);
    } else if id == to {
        out.expect(next(to));
    }
    let mut inbox = p.exchange(out)?;
    if id != to {
        return Ok(None);
    }
    let mut r = inbox.take(next(to))?;
    let c = r.ring(x.len(), x.ring)?;
    r.finish()?;
    let ring = x.ring;
    Ok(Some(
        (0..x.len())
            .map(|j| ring.add(ring.add(x.a[j], x.b[j]), c[j]))
            .collect(),
    ))
}
