//! Group-wise aggregation over vectors whose groups are contiguous runs,
//! marked by a shared flag vector g (g[i] = 1 at the first element of a
//! group, g[0] = 1).
//!
//! Values are moved to and from group heads with a stable sort on the
//! flags, so every aggregate costs a constant number of rounds regardless
//! of the group layout. Several independent vectors can be concatenated;
//! as long as each one starts with a head, groups never span two of them.

use crate::error::{Error, Result};
use crate::rss::{mul_many, sec_lt_many, ShareVec};
use crate::session::Party;
use crate::sort::{apply_perm_many, gen_perm_by_bit_many, unapply_perm_many, PermItem, SharedPerm};

/// Flags and the two sorting permutations derived from them.
pub struct GroupCtx {
    g: ShareVec,
    /// g shifted left by one with a trailing 1, reversed.
    tail_rev: ShareVec,
    head_perm: SharedPerm,
    tail_perm: SharedPerm,
    max_group: usize,
}

impl GroupCtx {
    /// `max_group` bounds the size of any group (the block length when
    /// several vectors are concatenated).
    pub fn new(p: &mut Party, g: &ShareVec, max_group: usize) -> Result<Self> {
        Ok(Self::with_extra(p, g, max_group, &[])?.0)
    }

    /// Like [`new`](Self::new), also returning gen_perm_by_bit of each
    /// vector in `extra`, computed in the same round.
    pub fn with_extra(
        p: &mut Party,
        g: &ShareVec,
        max_group: usize,
        extra: &[&ShareVec],
    ) -> Result<(Self, Vec<SharedPerm>)> {
        let n = g.len();
        if n == 0 {
            return Err(Error::config("empty group flag vector"));
        }
        let id = p.id();
        let ring = g.ring();
        let mut t = g.slice(1..n);
        t = ShareVec::concat(&[&t, &ShareVec::constant(id, ring, 1, 1)])?;
        let tail_rev = t.reverse();
        let (hb, tb) = (g.rsub_scalar(1), tail_rev.rsub_scalar(1));
        let mut bits = vec![&hb, &tb];
        bits.extend_from_slice(extra);
        let perms = gen_perm_by_bit_many(p, &bits)?;
        let mut it = perms.into_iter();
        let ctx = GroupCtx {
            g: g.clone(),
            tail_rev,
            head_perm: it.next().unwrap(),
            tail_perm: it.next().unwrap(),
            max_group: max_group.clamp(1, n),
        };
        Ok((ctx, it.collect()))
    }

    /// Stable sort moving group heads to the front.
    pub fn head_perm(&self) -> &SharedPerm {
        &self.head_perm
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn flags(&self) -> &ShareVec {
        &self.g
    }

    /// Copies each group's first value to all its members (`heads`) and
    /// each group's last value to all its members (`tails`), in one batch.
    pub fn broadcast(
        &self,
        p: &mut Party,
        heads: &[&ShareVec],
        tails: &[&ShareVec],
    ) -> Result<(Vec<ShareVec>, Vec<ShareVec>)> {
        for v in heads.iter().chain(tails) {
            Error::check_len(self.len(), v.len())?;
        }
        let tails_rev: Vec<ShareVec> = tails.iter().map(|v| v.reverse()).collect();
        let mut items = Vec::new();
        if !heads.is_empty() {
            items.push(PermItem {
                perm: &self.head_perm,
                vecs: heads.to_vec(),
            });
        }
        if !tails.is_empty() {
            items.push(PermItem {
                perm: &self.tail_perm,
                vecs: tails_rev.iter().collect(),
            });
        }
        let sorted = apply_perm_many(p, &items)?;
        let diffs: Vec<Vec<ShareVec>> = sorted
            .iter()
            .map(|vs| vs.iter().map(|w| w.sub(&shift_down(w, 1)?)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let items: Vec<PermItem> = items
            .iter()
            .zip(&diffs)
            .map(|(it, ds)| PermItem {
                perm: it.perm,
                vecs: ds.iter().collect(),
            })
            .collect();
        let spread = unapply_perm_many(p, &items)?;
        let mut flagged: Vec<&ShareVec> = Vec::new();
        let mut masks: Vec<&ShareVec> = Vec::new();
        let mut k = 0;
        if !heads.is_empty() {
            for e in &spread[k] {
                flagged.push(e);
                masks.push(&self.g);
            }
            k += 1;
        }
        if !tails.is_empty() {
            for e in &spread[k] {
                flagged.push(e);
                masks.push(&self.tail_rev);
            }
        }
        let pairs: Vec<(&ShareVec, &ShareVec)> = flagged.into_iter().zip(masks).collect();
        let masked = mul_many(p, &pairs)?;
        let mut out_h = Vec::with_capacity(heads.len());
        let mut out_t = Vec::with_capacity(tails.len());
        for (i, m) in masked.into_iter().enumerate() {
            if i < heads.len() {
                out_h.push(m.prefix_sum());
            } else {
                out_t.push(m.prefix_sum().reverse());
            }
        }
        Ok((out_h, out_t))
    }

    pub fn broadcast_head(&self, p: &mut Party, v: &ShareVec) -> Result<ShareVec> {
        Ok(self.broadcast(p, &[v], &[])?.0.remove(0))
    }

    pub fn broadcast_tail(&self, p: &mut Party, v: &ShareVec) -> Result<ShareVec> {
        Ok(self.broadcast(p, &[], &[v])?.1.remove(0))
    }

    /// Inclusive in-group prefix sums and group totals of every vector.
    pub fn prefix_and_sum(&self, p: &mut Party, xs: &[&ShareVec]) -> Result<(Vec<ShareVec>, Vec<ShareVec>)> {
        let s: Vec<ShareVec> = xs.iter().map(|x| x.prefix_sum()).collect();
        let e: Vec<ShareVec> = s.iter().zip(xs).map(|(s, x)| s.sub(x)).collect::<Result<_>>()?;
        let (he, ts) = self.broadcast(p, &e.iter().collect::<Vec<_>>(), &s.iter().collect::<Vec<_>>())?;
        let prefix = s.iter().zip(&he).map(|(s, h)| s.sub(h)).collect::<Result<_>>()?;
        let total = ts.iter().zip(&he).map(|(t, h)| t.sub(h)).collect::<Result<_>>()?;
        Ok((prefix, total))
    }

    pub fn group_prefix_sum(&self, p: &mut Party, x: &ShareVec) -> Result<ShareVec> {
        Ok(self.prefix_and_sum(p, &[x])?.0.remove(0))
    }

    pub fn group_sum(&self, p: &mut Party, x: &ShareVec) -> Result<ShareVec> {
        Ok(self.prefix_and_sum(p, &[x])?.1.remove(0))
    }

    /// Group maximum of x (signed), and the y paired with the last maximal
    /// element, broadcast to every member.
    pub fn group_max_pair(&self, p: &mut Party, x: &ShareVec, y: &ShareVec) -> Result<(ShareVec, ShareVec)> {
        Error::check_len(self.len(), x.len())?;
        Error::check_len(self.len(), y.len())?;
        let (mut v, mut w, mut f) = (x.clone(), y.clone(), self.g.clone());
        let mut d = 1;
        while d < self.max_group {
            let lv = shift_down_fill(&v, d)?;
            let lw = shift_down_fill(&w, d)?;
            let lf = shift_down_ones(&f, d)?;
            let c = sec_lt_many(p, &[(&v, &lv)])?.remove(0);
            let open = f.rsub_scalar(1);
            let r = mul_many(p, &[(&open, &c), (&f, &lf)])?;
            let sel = &r[0];
            f = f.add(&lf)?.sub(&r[1])?;
            let dv = lv.sub(&v)?;
            let dw = lw.sub(&w)?;
            let upd = mul_many(p, &[(sel, &dv), (sel, &dw)])?;
            v = v.add(&upd[0])?;
            w = w.add(&upd[1])?;
            d *= 2;
        }
        let (_, t) = self.broadcast(p, &[], &[&v, &w])?;
        let mut it = t.into_iter();
        Ok((it.next().unwrap(), it.next().unwrap()))
    }

    pub fn group_max(&self, p: &mut Party, x: &ShareVec) -> Result<ShareVec> {
        let (m, _) = self.group_max_pair(p, x, x)?;
        Ok(m)
    }
}

/// out[i] = v[i - d], zero-filled.
fn shift_down(v: &ShareVec, d: usize) -> Result<ShareVec> {
    let n = v.len();
    let z = ShareVec::zeros(v.owner(), v.ring(), d.min(n));
    ShareVec::concat(&[&z, &v.slice(0..n - d.min(n))])
}

/// out[i] = v[i - d], with v[i] itself for i < d.
fn shift_down_fill(v: &ShareVec, d: usize) -> Result<ShareVec> {
    let n = v.len();
    let d = d.min(n);
    ShareVec::concat(&[&v.slice(0..d), &v.slice(0..n - d)])
}

/// out[i] = v[i - d], with 1 for i < d.
fn shift_down_ones(v: &ShareVec, d: usize) -> Result<ShareVec> {
    let n = v.len();
    let d = d.min(n);
    let ones = ShareVec::constant(v.owner(), v.ring(), 1, d);
    ShareVec::concat(&[&ones, &v.slice(0..n - d)])
}

/// Maximum across columns with the payloads of the winning column; on
/// ties the later column wins. `ys[c]` holds the payload vectors of column
/// c. Columns are reduced pairwise in a tree.
pub fn vect_max(p: &mut Party, xs: &[ShareVec], ys: &[Vec<ShareVec>]) -> Result<(ShareVec, Vec<ShareVec>)> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::config("vect_max needs matching non-empty column lists"));
    }
    let np = ys[0].len();
    if ys.iter().any(|y| y.len() != np) {
        return Err(Error::config("vect_max columns carry different payload counts"));
    }
    let mut xs = xs.to_vec();
    let mut ys = ys.to_vec();
    while xs.len() > 1 {
        let pairs = xs.len() / 2;
        let lt_args: Vec<(&ShareVec, &ShareVec)> = (0..pairs).map(|k| (&xs[2 * k + 1], &xs[2 * k])).collect();
        let cs = sec_lt_many(p, &lt_args)?;
        let mut diffs: Vec<ShareVec> = Vec::with_capacity(pairs * (np + 1));
        for k in 0..pairs {
            diffs.push(xs[2 * k].sub(&xs[2 * k + 1])?);
            for j in 0..np {
                diffs.push(ys[2 * k][j].sub(&ys[2 * k + 1][j])?);
            }
        }
        let prods: Vec<(&ShareVec, &ShareVec)> =
            diffs.iter().enumerate().map(|(i, d)| (&cs[i / (np + 1)], d)).collect();
        let r = mul_many(p, &prods)?;
        let mut nx = Vec::with_capacity(pairs + 1);
        let mut ny = Vec::with_capacity(pairs + 1);
        for k in 0..pairs {
            let base = k * (np + 1);
            nx.push(xs[2 * k + 1].add(&r[base])?);
            let row: Vec<ShareVec> =
                (0..np).map(|j| ys[2 * k + 1][j].add(&r[base + 1 + j])).collect::<Result<_>>()?;
            ny.push(row);
        }
        if xs.len() % 2 == 1 {
            nx.push(xs.last().unwrap().clone());
            ny.push(ys.last().unwrap().clone());
        }
        xs = nx;
        ys = ny;
    }
    Ok((xs.remove(0), ys.remove(0)))
}

/// Group flags for a vector of node ids already sorted so that equal ids
/// are contiguous: g[0] = 1, g[j] = [id[j-1] != id[j]].
pub fn group_flags(p: &mut Party, sorted_ids: &ShareVec) -> Result<ShareVec> {
    let n = sorted_ids.len();
    if n == 0 {
        return Err(Error::config("empty node id vector"));
    }
    let prev = sorted_ids.slice(0..n - 1);
    let cur = sorted_ids.slice(1..n);
    let eq = crate::rss::sec_eq(p, &prev, &cur)?;
    let one = ShareVec::constant(p.id(), sorted_ids.ring(), 1, 1);
    ShareVec::concat(&[&one, &eq.rsub_scalar(1)])
}
