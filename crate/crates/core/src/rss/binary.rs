//! Replicated XOR sharing of packed bit strings, and the conversions
//! between arithmetic and boolean shares.

use crate::error::{Error, Result};
use crate::ring::{mask, RingConfig};
use crate::rss::{mul, ShareVec};
use crate::session::{Key, Party};
use crate::transport::{next, prev, MsgReader, MsgWriter, Outbox, PartyId, N_PARTIES};

/// One party's view of XOR-shared words of `width` bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoolVec {
    width: u32,
    owner: PartyId,
    a: Vec<u128>,
    b: Vec<u128>,
}

impl BoolVec {
    pub fn zeros(owner: PartyId, width: u32, n: usize) -> Self {
        BoolVec {
            width,
            owner,
            a: vec![0; n],
            b: vec![0; n],
        }
    }

    pub fn public(owner: PartyId, width: u32, values: &[u128]) -> Self {
        let mut s = Self::zeros(owner, width, values.len());
        let v: Vec<u128> = values.iter().map(|x| x & mask(width)).collect();
        match owner {
            0 => s.a = v,
            2 => s.b = v,
            _ => {}
        }
        s
    }

    pub fn from_components(owner: PartyId, width: u32, a: Vec<u128>, b: Vec<u128>) -> Result<Self> {
        Error::check_len(a.len(), b.len())?;
        let m = mask(width);
        Ok(BoolVec {
            width,
            owner,
            a: a.into_iter().map(|x| x & m).collect(),
            b: b.into_iter().map(|x| x & m).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn owner(&self) -> PartyId {
        self.owner
    }

    pub fn components(&self) -> (&[u128], &[u128]) {
        (&self.a, &self.b)
    }

    fn check(&self, o: &BoolVec) -> Result<()> {
        if self.width != o.width {
            return Err(Error::RingMismatch(self.width, o.width));
        }
        Error::check_len(self.len(), o.len())
    }

    pub fn xor(&self, o: &BoolVec) -> Result<BoolVec> {
        self.check(o)?;
        Ok(BoolVec {
            width: self.width,
            owner: self.owner,
            a: self.a.iter().zip(&o.a).map(|(x, y)| x ^ y).collect(),
            b: self.b.iter().zip(&o.b).map(|(x, y)| x ^ y).collect(),
        })
    }

    fn map(&self, f: impl Fn(u128) -> u128) -> BoolVec {
        let m = mask(self.width);
        BoolVec {
            width: self.width,
            owner: self.owner,
            a: self.a.iter().map(|x| f(*x) & m).collect(),
            b: self.b.iter().map(|x| f(*x) & m).collect(),
        }
    }

    /// XOR with a public constant.
    pub fn xor_public(&self, c: u128) -> BoolVec {
        let mut out = self.clone();
        let c = c & mask(self.width);
        match self.owner {
            0 => out.a.iter_mut().for_each(|x| *x ^= c),
            2 => out.b.iter_mut().for_each(|x| *x ^= c),
            _ => {}
        }
        out
    }

    pub fn not(&self) -> BoolVec {
        self.xor_public(mask(self.width))
    }

    pub fn shl(&self, s: u32) -> BoolVec {
        if s >= 128 {
            return BoolVec::zeros(self.owner, self.width, self.len());
        }
        self.map(|x| x << s)
    }

    pub fn shr(&self, s: u32) -> BoolVec {
        if s >= 128 {
            return BoolVec::zeros(self.owner, self.width, self.len());
        }
        self.map(|x| x >> s)
    }

    pub fn and_public(&self, m: u128) -> BoolVec {
        self.map(|x| x & m)
    }

    /// Same words viewed with another width; bits above it are dropped.
    pub fn resize(&self, width: u32) -> BoolVec {
        let m = mask(width);
        BoolVec {
            width,
            owner: self.owner,
            a: self.a.iter().map(|x| x & m).collect(),
            b: self.b.iter().map(|x| x & m).collect(),
        }
    }

    /// Bit `j` of every word as a width-1 vector.
    pub fn bit(&self, j: u32) -> BoolVec {
        BoolVec {
            width: 1,
            owner: self.owner,
            a: self.a.iter().map(|x| (x >> j) & 1).collect(),
            b: self.b.iter().map(|x| (x >> j) & 1).collect(),
        }
    }

    /// Reverses the low `width` bits of every word.
    pub fn reverse_bits(&self) -> BoolVec {
        let w = self.width;
        self.map(|x| x.reverse_bits() >> (128 - w))
    }

    pub fn concat(parts: &[&BoolVec]) -> Result<BoolVec> {
        let first = parts
            .first()
            .ok_or_else(|| Error::config("cannot concatenate zero vectors"))?;
        let mut out = BoolVec::zeros(first.owner, first.width, 0);
        for p in parts {
            if p.width != first.width {
                return Err(Error::RingMismatch(first.width, p.width));
            }
            out.a.extend_from_slice(&p.a);
            out.b.extend_from_slice(&p.b);
        }
        Ok(out)
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> BoolVec {
        BoolVec {
            width: self.width,
            owner: self.owner,
            a: self.a[range.clone()].to_vec(),
            b: self.b[range].to_vec(),
        }
    }

    pub fn split(&self, lens: &[usize]) -> Result<Vec<BoolVec>> {
        Error::check_len(self.len(), lens.iter().sum())?;
        let mut out = Vec::with_capacity(lens.len());
        let mut at = 0;
        for &l in lens {
            out.push(self.slice(at..at + l));
            at += l;
        }
        Ok(out)
    }
}

pub fn reconstruct_bool(shares: &[BoolVec]) -> Result<Vec<u128>> {
    if shares.len() != N_PARTIES {
        return Err(Error::config("need exactly three shares"));
    }
    let mut s: Vec<&BoolVec> = shares.iter().collect();
    s.sort_by_key(|v| v.owner);
    for i in 0..N_PARTIES {
        if s[i].owner != i {
            return Err(Error::config("shares must come from parties 0, 1 and 2"));
        }
        if s[i].b != s[next(i)].a {
            return Err(Error::Integrity(format!("boolean component {} differs", next(i))));
        }
    }
    Ok((0..s[0].len()).map(|j| s[0].a[j] ^ s[1].a[j] ^ s[2].a[j]).collect())
}

/// Random XOR-shared words, no interaction.
pub fn random_bool(p: &mut Party, n: usize, width: u32) -> BoolVec {
    let a = p.draw(Key::Prev, n, width);
    let b = p.draw(Key::Next, n, width);
    BoolVec {
        width,
        owner: p.id(),
        a,
        b,
    }
}

fn zero_xor(p: &mut Party, n: usize, width: u32) -> Vec<u128> {
    let x = p.draw(Key::Next, n, width);
    let y = p.draw(Key::Prev, n, width);
    x.iter().zip(&y).map(|(a, b)| a ^ b).collect()
}

/// Elementwise AND. One round, `width` bits per party per element.
pub fn and(p: &mut Party, x: &BoolVec, y: &BoolVec) -> Result<BoolVec> {
    x.check(y)?;
    let id = p.id();
    let alpha = zero_xor(p, x.len(), x.width);
    let z: Vec<u128> = (0..x.len())
        .map(|j| (x.a[j] & y.a[j]) ^ (x.a[j] & y.b[j]) ^ (x.b[j] & y.a[j]) ^ alpha[j])
        .collect();
    let mut m = MsgWriter::new();
    m.words(&z, x.width);
    let mut out = Outbox::new();
    out.send(prev(id), m).expect(next(id));
    let mut inbox = p.exchange(out)?;
    let mut r = inbox.take(next(id))?;
    let b = r.words(z.len(), x.width)?;
    r.finish()?;
    Ok(BoolVec {
        width: x.width,
        owner: id,
        a: z,
        b,
    })
}

/// Several ANDs of equal width in one round.
pub fn and_many(p: &mut Party, pairs: &[(&BoolVec, &BoolVec)]) -> Result<Vec<BoolVec>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let xs: Vec<&BoolVec> = pairs.iter().map(|(x, _)| *x).collect();
    let ys: Vec<&BoolVec> = pairs.iter().map(|(_, y)| *y).collect();
    let lens: Vec<usize> = xs.iter().map(|x| x.len()).collect();
    and(p, &BoolVec::concat(&xs)?, &BoolVec::concat(&ys)?)?.split(&lens)
}

/// Opens XOR-shared words to all parties. One round.
pub fn reveal_bool(p: &mut Party, x: &BoolVec) -> Result<Vec<u128>> {
    let id = p.id();
    let mut m = MsgWriter::new();
    m.words(&x.b, x.width);
    let mut out = Outbox::new();
    out.send(prev(id), m).expect(next(id));
    let mut inbox = p.exchange(out)?;
    let mut r = inbox.take(next(id))?;
    let c = r.words(x.len(), x.width)?;
    r.finish()?;
    Ok((0..x.len()).map(|j| x.a[j] ^ x.b[j] ^ c[j]).collect())
}

/// Ripple-free sum of two shared words mod 2^width with a Kogge-Stone
/// prefix network. 1 + ceil(log2 width) rounds.
pub fn add_bool(p: &mut Party, x: &BoolVec, y: &BoolVec) -> Result<BoolVec> {
    x.check(y)?;
    let w = x.width;
    let mut g = and(p, x, y)?;
    let mut pr = x.xor(y)?;
    let mut d = 1u32;
    while d < w {
        if 2 * d < w {
            let gs = g.shl(d);
            let ps = pr.shl(d);
            let r = and_many(p, &[(&pr, &gs), (&pr, &ps)])?;
            g = g.xor(&r[0])?;
            pr = r[1].clone();
        } else {
            let gs = g.shl(d);
            g = g.xor(&and(p, &pr, &gs)?)?;
        }
        d *= 2;
    }
    x.xor(y)?.xor(&g.shl(1))
}

/// Arithmetic to boolean: each component is a boolean sharing of itself;
/// a carry-save layer reduces three summands to two, then one adder.
pub fn a2b(p: &mut Party, x: &ShareVec) -> Result<BoolVec> {
    let id = p.id();
    let w = x.ring().width();
    let n = x.len();
    let (xa, xb) = x.components();
    let mut parts: Vec<BoolVec> = (0..N_PARTIES).map(|_| BoolVec::zeros(id, w, n)).collect();
    parts[id].a = xa.to_vec();
    parts[next(id)].b = xb.to_vec();
    let [x0, x1, x2] = [&parts[0], &parts[1], &parts[2]];
    let s = x0.xor(x1)?.xor(x2)?;
    let maj = and(p, &x0.xor(x2)?, &x1.xor(x2)?)?.xor(x2)?;
    add_bool(p, &s, &maj.shl(1))
}

/// Boolean-shared single bits to arithmetic shares in `ring`. Two rounds.
pub fn b2a_bits(p: &mut Party, bits: &BoolVec, ring: RingConfig) -> Result<ShareVec> {
    if bits.width != 1 {
        return Err(Error::config("b2a_bits expects width-1 words"));
    }
    let id = p.id();
    let n = bits.len();
    let dealt: Vec<u128> = if id == 0 {
        bits.a.iter().zip(&bits.b).map(|(x, y)| x ^ y).collect()
    } else {
        Vec::new()
    };
    let a = crate::rss::input(p, 0, (id == 0).then_some(dealt.as_slice()), n, ring)?;
    let c2 = match id {
        1 => ShareVec::from_components(1, ring, vec![0; n], bits.b.clone())?,
        2 => ShareVec::from_components(2, ring, bits.a.clone(), vec![0; n])?,
        _ => ShareVec::zeros(0, ring, n),
    };
    let prod = mul(p, &a, &c2)?;
    a.add(&c2)?.sub(&prod.mul_scalar(2))
}

/// Boolean-shared words (width at most the ring width) to arithmetic shares.
/// Components c0 and c2 come from the PRG; party 2 supplies -(c0 + c2) and
/// the word c1 = x - c0 - c2 is computed by an adder and opened to parties
/// 0 and 1.
pub fn b2a_word(p: &mut Party, x: &BoolVec, ring: RingConfig) -> Result<ShareVec> {
    let w = ring.width();
    if x.width > w {
        return Err(Error::config(format!("{}-bit words do not fit a {w}-bit ring", x.width)));
    }
    let id = p.id();
    let n = x.len();
    let x = x.resize(w);
    // c0 from K_2 (parties 2 and 0), c2 from K_1 (parties 1 and 2).
    let c0 = match id {
        0 => p.draw(Key::Prev, n, w),
        2 => p.draw(Key::Next, n, w),
        _ => Vec::new(),
    };
    let c2 = match id {
        1 => p.draw(Key::Next, n, w),
        2 => p.draw(Key::Prev, n, w),
        _ => Vec::new(),
    };
    let y: Option<Vec<u128>> = (id == 2).then(|| {
        c0.iter()
            .zip(&c2)
            .map(|(a, b)| ring.neg(ring.add(*a, *b)))
            .collect()
    });
    let yb = input_bool(p, 2, y.as_deref(), n, w)?;
    let c1b = add_bool(p, &x, &yb)?;
    // Open c1 to parties 0 and 1.
    let mut out = Outbox::new();
    match id {
        0 => {
            let mut m = MsgWriter::new();
            m.words(&c1b.a, w);
            out.send(1, m).expect(1);
        }
        1 => {
            let mut m = MsgWriter::new();
            m.words(&c1b.b, w);
            out.send(0, m).expect(0);
        }
        _ => {}
    }
    let mut inbox = p.exchange(out)?;
    let (a, b) = match id {
        0 => {
            let mut r = inbox.take(1)?;
            let c = r.words(n, w)?;
            r.finish()?;
            let c1: Vec<u128> = (0..n).map(|j| c1b.a[j] ^ c1b.b[j] ^ c[j]).collect();
            (c0, c1)
        }
        1 => {
            let mut r = inbox.take(0)?;
            let c = r.words(n, w)?;
            r.finish()?;
            let c1: Vec<u128> = (0..n).map(|j| c1b.a[j] ^ c1b.b[j] ^ c[j]).collect();
            (c1, c2)
        }
        _ => (c2, c0),
    };
    ShareVec::from_components(id, ring, a, b)
}

pub(crate) fn deal_bool_begin(
    p: &mut Party,
    dealer: PartyId,
    values: Option<&[u128]>,
    n: usize,
    width: u32,
    msg: &mut MsgWriter,
) -> Result<BoolVec> {
    let id = p.id();
    let mut s = BoolVec::zeros(id, width, n);
    if id == dealer {
        let v = values.ok_or_else(|| Error::config(format!("dealer {dealer} has no input")))?;
        Error::check_len(n, v.len())?;
        let r = p.draw(Key::Prev, n, width);
        let x: Vec<u128> = v.iter().zip(&r).map(|(v, r)| (v ^ r) & mask(width)).collect();
        msg.words(&x, width);
        s.a = r;
        s.b = x;
    } else if id == prev(dealer) {
        s.b = p.draw(Key::Next, n, width);
    }
    Ok(s)
}

pub(crate) fn deal_bool_end(dealer: PartyId, s: &mut BoolVec, r: &mut MsgReader) -> Result<()> {
    if s.owner == next(dealer) {
        s.a = r.words(s.len(), s.width)?;
    }
    Ok(())
}

/// XOR-shares words held by `dealer`. One round.
pub fn input_bool(
    p: &mut Party,
    dealer: PartyId,
    values: Option<&[u128]>,
    n: usize,
    width: u32,
) -> Result<BoolVec> {
    let mut msg = MsgWriter::new();
    let mut s = deal_bool_begin(p, dealer, values, n, width, &mut msg)?;
    let id = p.id();
    let mut out = Outbox::new();
    if id == dealer {
        out.send(next(dealer), msg);
    } else if id == next(dealer) {
        out.expect(dealer);
    }
    let mut inbox = p.exchange(out)?;
    if id == next(dealer) {
        let mut r = inbox.take(dealer)?;
        deal_bool_end(dealer, &mut s, &mut r)?;
        r.finish()?;
    }
    Ok(s)
}

/// Arithmetic shares of the low `nbits` bits of every element, one vector
/// per bit position (least significant first).
pub fn bit_decompose(p: &mut Party, x: &ShareVec, nbits: u32) -> Result<Vec<ShareVec>> {
    let xb = a2b(p, x)?;
    let bits: Vec<BoolVec> = (0..nbits).map(|j| xb.bit(j)).collect();
    let refs: Vec<&BoolVec> = bits.iter().collect();
    let all = b2a_bits(p, &BoolVec::concat(&refs)?, x.ring())?;
    all.chunks(nbits as usize)
}
