//! Shared permutations: resharing shuffles, applying and inverting shared
//! permutations, and stable radix-sort permutation generation.
//!
//! A permutation π maps source index i to destination π[i]:
//! apply(π, x)[π[i]] = x[i] and unapply(π, z)[i] = z[π[i]].
//! Several independent items can be processed in the same rounds.

use crate::error::{Error, Result};
use crate::ring::RingConfig;
use crate::rss::binary::bit_decompose;
use crate::rss::{mul, reveal, ShareVec};
use crate::session::{Key, Party};
use crate::transport::{next, MsgWriter, Outbox, PartyId, N_PARTIES};

/// Shares of destination indices, one per element.
pub type SharedPerm = ShareVec;

/// apply(π, x) on public vectors.
pub fn apply_plain<T: Clone + Default>(perm: &[usize], x: &[T]) -> Vec<T> {
    let mut z = vec![T::default(); x.len()];
    for (i, v) in x.iter().enumerate() {
        z[perm[i]] = v.clone();
    }
    z
}

/// unapply(π, z) on public vectors.
pub fn unapply_plain<T: Clone>(perm: &[usize], z: &[T]) -> Vec<T> {
    perm.iter().map(|&d| z[d].clone()).collect()
}

/// compose(α, β)[i] = β[α[i]]: first α, then β.
pub fn compose_plain(alpha: &[usize], beta: &[usize]) -> Vec<usize> {
    alpha.iter().map(|&a| beta[a]).collect()
}

pub fn invert_plain(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &d) in perm.iter().enumerate() {
        inv[d] = i;
    }
    inv
}

/// Opened permutation values as indices, rejecting anything that is not a
/// permutation of 0..n.
fn as_perm(values: &[u128]) -> Result<Vec<usize>> {
    let n = values.len();
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for &v in values {
        let d = usize::try_from(v).ok().filter(|d| *d < n).ok_or_else(|| {
            Error::Integrity(format!("permutation entry {v} outside 0..{n}"))
        })?;
        if std::mem::replace(&mut seen[d], true) {
            return Err(Error::Integrity(format!("permutation repeats destination {d}")));
        }
        out.push(d);
    }
    Ok(out)
}

/// Leg permutations of one shuffle, as known to this party (two of three).
#[derive(Clone, Debug)]
pub struct ShuffleTrace {
    legs: Vec<Vec<Option<Vec<usize>>>>,
}

/// One resharing leg for the pair (j, j+1): both permute locally with a
/// permutation they share, re-randomize, and hand fresh components to j+2.
/// `perms[g]` is `Some` on parties j and j+1.
fn reshare_leg(
    p: &mut Party,
    j: PartyId,
    groups: &mut [Vec<ShareVec>],
    perms: &[Option<Vec<usize>>],
    inverse: bool,
) -> Result<()> {
    let id = p.id();
    let third = (j + 2) % N_PARTIES;
    let mut msg = MsgWriter::new();
    for (g, vecs) in groups.iter_mut().enumerate() {
        for v in vecs.iter_mut() {
            let ring = v.ring();
            let n = v.len();
            if id == third {
                continue;
            }
            let perm = perms[g].as_ref().expect("pair member knows its leg");
            let key = if id == j { Key::Next } else { Key::Prev };
            let r1 = p.draw(key, n, ring.width());
            let r2 = p.draw(key, n, ring.width());
            let (a, b) = v.components();
            let local: Vec<u128> = if id == j {
                a.iter().zip(b).map(|(x, y)| ring.add(*x, *y)).collect()
            } else {
                b.to_vec()
            };
            let moved = permute(&local, perm, inverse);
            let (new_a, new_b) = if id == j {
                let sent: Vec<u128> = moved.iter().zip(&r1).map(|(x, r)| ring.sub(*x, *r)).collect();
                msg.ring(&sent, ring);
                (sent, r2)
            } else {
                let sent: Vec<u128> = (0..n).map(|t| ring.sub(ring.add(moved[t], r1[t]), r2[t])).collect();
                msg.ring(&sent, ring);
                (r2, sent)
            };
            *v = ShareVec::from_components(id, ring, new_a, new_b)?;
        }
    }
    let mut out = Outbox::new();
    if id == third {
        out.expect(j).expect(next(j));
    } else {
        out.send(third, msg);
    }
    let mut inbox = p.exchange(out)?;
    if id == third {
        let mut from_j = inbox.take(j)?;
        let mut from_j1 = inbox.take(next(j))?;
        for vecs in groups.iter_mut() {
            for v in vecs.iter_mut() {
                let ring = v.ring();
                let x = from_j.ring(v.len(), ring)?;
                let y = from_j1.ring(v.len(), ring)?;
                // Party j+2 holds (x_{j+2}, x_j).
                *v = ShareVec::from_components(id, ring, y, x)?;
            }
        }
        from_j.finish()?;
        from_j1.finish()?;
    }
    Ok(())
}

/// Forward leg: out[t] = x[σ[t]]. Inverse leg: out[σ[t]] = x[t].
fn permute(x: &[u128], perm: &[usize], inverse: bool) -> Vec<u128> {
    if inverse {
        let mut out = vec![0; x.len()];
        for (t, &s) in perm.iter().enumerate() {
            out[s] = x[t];
        }
        out
    } else {
        perm.iter().map(|&s| x[s]).collect()
    }
}

/// Shuffles every group with its own secret permutation; vectors within a
/// group move together. Three rounds.
pub fn shuffle(p: &mut Party, groups: &mut [Vec<ShareVec>]) -> Result<ShuffleTrace> {
    for vecs in groups.iter() {
        if let Some(first) = vecs.first() {
            for v in vecs {
                Error::check_len(first.len(), v.len())?;
            }
        }
    }
    let id = p.id();
    let mut legs = Vec::with_capacity(N_PARTIES);
    for j in 0..N_PARTIES {
        let perms: Vec<Option<Vec<usize>>> = groups
            .iter()
            .map(|vecs| {
                let n = vecs.first().map_or(0, |v| v.len());
                if id == j {
                    Some(p.draw_perm(Key::Next, n))
                } else if id == next(j) {
                    Some(p.draw_perm(Key::Prev, n))
                } else {
                    None
                }
            })
            .collect();
        reshare_leg(p, j, groups, &perms, false)?;
        legs.push(perms);
    }
    Ok(ShuffleTrace { legs })
}

/// Undoes a shuffle; groups must have the same lengths as when shuffled.
/// Three rounds.
pub fn unshuffle(p: &mut Party, groups: &mut [Vec<ShareVec>], trace: &ShuffleTrace) -> Result<()> {
    for j in (0..N_PARTIES).rev() {
        reshare_leg(p, j, groups, &trace.legs[j], true)?;
    }
    Ok(())
}

/// One permutation together with the vectors it acts on.
pub struct PermItem<'a> {
    pub perm: &'a SharedPerm,
    pub vecs: Vec<&'a ShareVec>,
}

/// apply(π, x) for every item. Four rounds.
pub fn apply_perm_many(p: &mut Party, items: &[PermItem]) -> Result<Vec<Vec<ShareVec>>> {
    let mut groups: Vec<Vec<ShareVec>> = items
        .iter()
        .map(|it| {
            let mut g = vec![it.perm.clone()];
            g.extend(it.vecs.iter().map(|v| (*v).clone()));
            g
        })
        .collect();
    for g in &groups {
        for v in g {
            Error::check_len(g[0].len(), v.len())?;
        }
    }
    shuffle(p, &mut groups)?;
    let perms: Vec<&ShareVec> = groups.iter().map(|g| &g[0]).collect();
    let lens: Vec<usize> = perms.iter().map(|v| v.len()).collect();
    let opened = reveal(p, &ShareVec::concat(&perms)?)?;
    let mut out = Vec::with_capacity(items.len());
    let mut at = 0;
    for (g, len) in groups.iter().zip(lens) {
        let dest = as_perm(&opened[at..at + len])?;
        at += len;
        let inv = invert_plain(&dest);
        out.push(g[1..].iter().map(|v| v.gather(&inv)).collect());
    }
    Ok(out)
}

pub fn apply_perm(p: &mut Party, perm: &SharedPerm, x: &ShareVec) -> Result<ShareVec> {
    Ok(apply_perm_many(p, &[PermItem { perm, vecs: vec![x] }])?.remove(0).remove(0))
}

/// unapply(π, z) for every item. Seven rounds.
pub fn unapply_perm_many(p: &mut Party, items: &[PermItem]) -> Result<Vec<Vec<ShareVec>>> {
    let mut perm_groups: Vec<Vec<ShareVec>> = items.iter().map(|it| vec![it.perm.clone()]).collect();
    for it in items {
        for v in &it.vecs {
            Error::check_len(it.perm.len(), v.len())?;
        }
    }
    let trace = shuffle(p, &mut perm_groups)?;
    let perms: Vec<&ShareVec> = perm_groups.iter().map(|g| &g[0]).collect();
    let lens: Vec<usize> = perms.iter().map(|v| v.len()).collect();
    let opened = reveal(p, &ShareVec::concat(&perms)?)?;
    let mut groups = Vec::with_capacity(items.len());
    let mut at = 0;
    for (it, len) in items.iter().zip(lens) {
        let dest = as_perm(&opened[at..at + len])?;
        at += len;
        groups.push(it.vecs.iter().map(|v| v.gather(&dest)).collect::<Vec<_>>());
    }
    unshuffle(p, &mut groups, &trace)?;
    Ok(groups)
}

pub fn unapply_perm(p: &mut Party, perm: &SharedPerm, z: &ShareVec) -> Result<ShareVec> {
    Ok(unapply_perm_many(p, &[PermItem { perm, vecs: vec![z] }])?.remove(0).remove(0))
}

/// compose(α, β)[i] = β[α[i]], i.e. unapply(α, β).
pub fn compose(p: &mut Party, alpha: &SharedPerm, beta: &SharedPerm) -> Result<SharedPerm> {
    unapply_perm(p, alpha, beta)
}

/// Stable sorting permutation of a shared bit vector (zeros first), for
/// several vectors at once. One multiplication round.
pub fn gen_perm_by_bit_many(p: &mut Party, bits: &[&ShareVec]) -> Result<Vec<SharedPerm>> {
    if bits.is_empty() {
        return Ok(Vec::new());
    }
    let id = p.id();
    let mut s0s = Vec::new();
    let mut deltas = Vec::new();
    let mut lens = Vec::new();
    for b in bits {
        let n = b.len();
        let ring = b.ring();
        let s0 = b.rsub_scalar(1).prefix_sum();
        let total = if n == 0 { ShareVec::zeros(id, ring, 0) } else { s0.slice(n - 1..n).repeat(n) };
        let s1 = b.prefix_sum().add(&total)?;
        deltas.push(s1.sub(&s0)?);
        s0s.push(s0);
        lens.push(n);
    }
    let b_all = ShareVec::concat(bits)?;
    let d_all = ShareVec::concat(&deltas.iter().collect::<Vec<_>>())?;
    let prod = mul(p, &b_all, &d_all)?.split(&lens)?;
    s0s.iter()
        .zip(prod)
        .map(|(s0, pr)| s0.add_scalar(s0.ring().neg(1)).add(&pr))
        .collect()
}

pub fn gen_perm_by_bit(p: &mut Party, b: &ShareVec) -> Result<SharedPerm> {
    Ok(gen_perm_by_bit_many(p, &[b])?.remove(0))
}

/// Stable ascending sorting permutations of unsigned `key_bits`-bit keys,
/// one radix step per bit, for several key vectors at once.
pub fn gen_perm_many(p: &mut Party, keys: &[&ShareVec], key_bits: u32) -> Result<Vec<SharedPerm>> {
    if keys.is_empty() {
        return Ok(Vec::new());
    }
    if key_bits == 0 || key_bits > keys[0].ring().width() {
        return Err(Error::config(format!("cannot sort on {key_bits}-bit keys")));
    }
    let lens: Vec<usize> = keys.iter().map(|k| k.len()).collect();
    let all = ShareVec::concat(keys)?;
    let bits_all = bit_decompose(p, &all, key_bits)?;
    let bits: Vec<Vec<ShareVec>> = bits_all.iter().map(|b| b.split(&lens)).collect::<Result<_>>()?;
    let first: Vec<&ShareVec> = bits[0].iter().collect();
    let mut sigma = gen_perm_by_bit_many(p, &first)?;
    for level in bits.iter().skip(1) {
        let items: Vec<PermItem> = sigma
            .iter()
            .zip(level)
            .map(|(s, b)| PermItem { perm: s, vecs: vec![b] })
            .collect();
        let sorted: Vec<ShareVec> = apply_perm_many(p, &items)?.into_iter().map(|mut v| v.remove(0)).collect();
        let refs: Vec<&ShareVec> = sorted.iter().collect();
        let rho = gen_perm_by_bit_many(p, &refs)?;
        let items: Vec<PermItem> = sigma
            .iter()
            .zip(&rho)
            .map(|(s, r)| PermItem { perm: s, vecs: vec![r] })
            .collect();
        sigma = unapply_perm_many(p, &items)?.into_iter().map(|mut v| v.remove(0)).collect();
    }
    Ok(sigma)
}

pub fn gen_perm(p: &mut Party, key: &ShareVec, key_bits: u32) -> Result<SharedPerm> {
    Ok(gen_perm_many(p, &[key], key_bits)?.remove(0))
}

/// Shared identity permutation.
pub fn identity(owner: PartyId, ring: RingConfig, n: usize) -> SharedPerm {
    let v: Vec<u128> = (0..n as u128).collect();
    ShareVec::public(owner, ring, &v)
}
