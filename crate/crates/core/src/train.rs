//! Layer-by-layer decision tree training on shares.
//!
//! Every attribute gets a sorting permutation once, up front. After each
//! layer the permutations are refined with one radix step on the branch
//! bits, so applying π_i lists the samples grouped by node with each group
//! sorted by attribute i. All nodes of a layer are trained together with
//! the group-wise protocols; the m attributes are handled as one
//! concatenated vector of m blocks.
//!
//! Attributes are shared as quantized integers a. The working attribute is
//! 2a, so the midpoint threshold between a[j] and a[j+1] is the integer
//! a[j] + a[j+1] in working units.

use crate::convert::{convert_share, ConversionContext};
use crate::error::{Error, Result};
use crate::groupwise::{vect_max, GroupCtx};
use crate::model::{ModelMeta, SharedLeafLayer, SharedSplitLayer, SharedTree};
use crate::oracle::{ceil_log2, PlainDataset};
use crate::ring::RingConfig;
use crate::rss::{input, mul, mul_many, sec_div, sec_eq, sec_eq_many, sec_lt, sec_trunc, DivBounds, ShareVec};
use crate::session::Party;
use crate::sort::{
    apply_perm_many, gen_perm_by_bit, gen_perm_by_bit_many, gen_perm_many, unapply_perm_many, PermItem,
    SharedPerm,
};
use crate::transport::{MsgWriter, Outbox, PartyId, Phase};

/// Ring and precision parameters of a training run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainConfig {
    pub height: u32,
    pub small: RingConfig,
    pub large: RingConfig,
    /// Fractional bits of the Gini quotients.
    pub frac_bits: u32,
    /// Quantization factor recorded in the model.
    pub scale: u128,
}

impl TrainConfig {
    /// Defaults to f = 2 ceil(log2 n) when `frac_bits` is `None`.
    pub fn new(height: u32, k: u32, l: u32, frac_bits: Option<u32>, n: usize) -> Result<Self> {
        let cfg = TrainConfig {
            height,
            small: RingConfig::integer(k)?,
            large: RingConfig::integer(l)?,
            frac_bits: frac_bits.unwrap_or(2 * ceil_log2(n as u128)),
            scale: 1,
        };
        cfg.check(n, 2)?;
        Ok(cfg)
    }

    pub fn with_scale(mut self, scale: u128) -> Self {
        self.scale = scale;
        self
    }

    /// Right shift applied to Gini values so they fit the small ring.
    pub fn gini_shift(&self, n: usize) -> u32 {
        (self.frac_bits + ceil_log2(n as u128)).saturating_sub(self.small.width() - 1)
    }

    /// Bounds of the Gini numerators and denominators for `n` samples.
    pub fn div_bounds(n: usize) -> DivBounds {
        let den_bits = ceil_log2(n as u128 + 1);
        DivBounds {
            num_bits: 2 * den_bits,
            den_bits,
        }
    }

    pub fn check(&self, n: usize, v: usize) -> Result<()> {
        let k = self.small.width();
        if self.height == 0 {
            return Err(Error::config("tree height must be at least 1"));
        }
        if n == 0 {
            return Err(Error::config("no training samples"));
        }
        if k >= self.large.width() {
            return Err(Error::config("the small ring must be narrower than the large ring"));
        }
        if self.height + 2 > k {
            return Err(Error::config(format!("height {} leaves no room for node ids in {k} bits", self.height)));
        }
        let bits_n = ceil_log2(n as u128 + 1);
        if bits_n + 2 > k || ceil_log2(v as u128) + 2 > k {
            return Err(Error::config(format!("{n} samples do not fit a {k}-bit ring")));
        }
        if self.frac_bits + 2 * bits_n + 2 > self.large.width() {
            return Err(Error::config(format!(
                "{} fractional bits leave no headroom in the {}-bit ring",
                self.frac_bits,
                self.large.width()
            )));
        }
        Self::div_bounds(n).plan(self.large, self.frac_bits)?;
        Ok(())
    }
}

/// Secret-shared training data: quantized attributes and labels.
#[derive(Clone, Debug)]
pub struct SecureDataset {
    /// Quantized attributes; the working values are twice these.
    pub halves: Vec<ShareVec>,
    pub labels: ShareVec,
    pub n: usize,
    pub m: usize,
    pub v: usize,
}

impl SecureDataset {
    /// Party `owner` shares `data`; the others pass `None`. The public sizes
    /// are sent first. Two rounds in the input phase.
    pub fn input(p: &mut Party, owner: PartyId, data: Option<&PlainDataset>, ring: RingConfig) -> Result<Self> {
        p.in_phase(Phase::Input, |p| {
            let id = p.id();
            let mut out = Outbox::new();
            let mut dims = [0u128; 3];
            if id == owner {
                let ds = data.ok_or_else(|| Error::config("the data owner has no dataset"))?;
                let limit = 1i128 << (ring.width() - 2);
                for (i, col) in ds.attrs.iter().enumerate() {
                    if let Some(v) = col.iter().find(|v| v.abs() >= limit) {
                        return Err(Error::range(format!(
                            "attribute {i} value {v} does not fit a {}-bit ring",
                            ring.width()
                        )));
                    }
                }
                dims = [ds.n() as u128, ds.m() as u128, ds.num_labels as u128];
                for to in (0..3).filter(|t| *t != owner) {
                    let mut m = MsgWriter::new();
                    m.words(&dims, 64);
                    out.send(to, m);
                }
            } else {
                out.expect(owner);
            }
            let mut inbox = p.exchange(out)?;
            if id != owner {
                let mut r = inbox.take(owner)?;
                let d = r.words(3, 64)?;
                r.finish()?;
                dims.copy_from_slice(&d);
            }
            let (n, m, v) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
            if n == 0 || m == 0 || v == 0 {
                return Err(Error::config("empty dataset"));
            }
            let flat: Option<Vec<u128>> = data.filter(|_| id == owner).map(|ds| {
                let mut f: Vec<u128> = Vec::with_capacity((m + 1) * n);
                for col in &ds.attrs {
                    f.extend(col.iter().map(|x| ring.from_signed(x / 2)));
                }
                f.extend(ds.labels.iter().map(|l| *l as u128));
                f
            });
            let all = input(p, owner, flat.as_deref(), (m + 1) * n, ring)?;
            let mut parts = all.chunks(m + 1)?;
            let labels = parts.pop().unwrap();
            Ok(SecureDataset {
                halves: parts,
                labels,
                n,
                m,
                v,
            })
        })
    }

    pub fn ring(&self) -> RingConfig {
        self.labels.ring()
    }

    /// Working (doubled) attribute i.
    pub fn attr(&self, i: usize) -> ShareVec {
        self.halves[i].mul_scalar(2)
    }
}

/// One party's result of training.
pub struct TrainOutput {
    pub tree: SharedTree,
    /// Node id of every sample after the last internal layer.
    pub leaf_nids: ShareVec,
    /// Number of full-key sorting permutations generated.
    pub gen_perm_calls: usize,
}

/// Outputs of one internal layer.
pub struct LayerOutputs {
    /// Split attribute of every sample's node, in sample order.
    pub spat: ShareVec,
    /// Split threshold of every sample's node, in sample order.
    pub spth: ShareVec,
    pub layer: SharedSplitLayer,
    /// Per attribute, the best masked Gini of every position's group
    /// (attribute i's sorted order).
    pub best_gini: Vec<ShareVec>,
}

fn constants(id: PartyId, ring: RingConfig, count: usize, n: usize) -> ShareVec {
    let v: Vec<u128> = (0..count as u128).flat_map(|c| std::iter::repeat_n(c, n)).collect();
    ShareVec::public(id, ring, &v)
}

/// Trains a tree of height `cfg.height`.
pub fn train_decision_tree(p: &mut Party, ds: &SecureDataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.check(ds.n, ds.v)?;
    if ds.ring().width() != cfg.small.width() {
        return Err(Error::RingMismatch(ds.ring().width(), cfg.small.width()));
    }
    let id = p.id();
    let ring = cfg.small;
    let k = ring.width();
    let offset = ring.pow2(k - 1);
    let keys: Vec<ShareVec> = ds.halves.iter().map(|a| a.add_scalar(offset)).collect();
    let refs: Vec<&ShareVec> = keys.iter().collect();
    let mut perms = gen_perm_many(p, &refs, k)?;
    let gen_perm_calls = keys.len();

    let mut conv = ConversionContext::new(cfg.small, cfg.large)?;
    let mut spnd = ShareVec::zeros(id, ring, ds.n);
    let mut internal = Vec::with_capacity(cfg.height as usize);
    for layer in 0..cfg.height {
        let out = train_internal_layer(p, layer, &spnd, ds, &perms, cfg, &mut conv)?;
        let b = test_samples(p, ds, &out.spat, &out.spth)?;
        spnd = advance_spnd(&spnd, &b)?;
        perms = update_perms(p, &b, &perms)?;
        internal.push(out.layer);
    }
    let leaf = train_leaf_layer(p, cfg.height, &perms[0], &spnd, &ds.labels, ds.v)?;
    Ok(TrainOutput {
        tree: SharedTree {
            meta: ModelMeta {
                num_attrs: ds.m,
                num_labels: ds.v,
                height: cfg.height,
                scale: cfg.scale,
                frac_bits: cfg.frac_bits,
            },
            internal,
            leaf,
        },
        leaf_nids: spnd,
        gen_perm_calls,
    })
}

/// 2 spnd + 1 + b, locally.
pub fn advance_spnd(spnd: &ShareVec, b: &ShareVec) -> Result<ShareVec> {
    spnd.mul_scalar(2).add(b).map(|s| s.add_scalar(1))
}

/// Refines every π_i with a stable sort on the branch bits b (in sample
/// order), so b becomes the most significant key.
pub fn update_perms(p: &mut Party, b: &ShareVec, perms: &[SharedPerm]) -> Result<Vec<SharedPerm>> {
    for pi in perms {
        Error::check_len(pi.len(), b.len())?;
    }
    let items: Vec<PermItem> = perms.iter().map(|pi| PermItem { perm: pi, vecs: vec![b] }).collect();
    let sorted: Vec<ShareVec> = apply_perm_many(p, &items)?.into_iter().map(|mut v| v.remove(0)).collect();
    let refs: Vec<&ShareVec> = sorted.iter().collect();
    let rhos = gen_perm_by_bit_many(p, &refs)?;
    let items: Vec<PermItem> = perms
        .iter()
        .zip(&rhos)
        .map(|(pi, r)| PermItem { perm: pi, vecs: vec![r] })
        .collect();
    Ok(unapply_perm_many(p, &items)?.into_iter().map(|mut v| v.remove(0)).collect())
}

/// Moves group heads to the front with `alpha` and keeps min(2^k, n)
/// entries of every vector.
pub fn format_layer_with(p: &mut Party, alpha: &SharedPerm, k: u32, ws: &[&ShareVec]) -> Result<Vec<ShareVec>> {
    let n = alpha.len();
    let keep = if k >= 63 { n } else { n.min(1usize << k) };
    let out = apply_perm_many(p, &[PermItem { perm: alpha, vecs: ws.to_vec() }])?.remove(0);
    Ok(out.into_iter().map(|w| w.slice(0..keep)).collect())
}

/// [`format_layer_with`] for the permutation gen_perm_by_bit(1 - g).
pub fn format_layer(p: &mut Party, k: u32, g: &ShareVec, ws: &[&ShareVec]) -> Result<Vec<ShareVec>> {
    let alpha = gen_perm_by_bit(p, &g.rsub_scalar(1))?;
    format_layer_with(p, &alpha, k, ws)
}

/// Modified Gini of every split position: for each position j of a group,
/// sum_l pre_l^2 / ps + sum_l suf_l^2 / ss, where pre and suf count labels
/// up to and after j. `indicators[l]` holds [y == l]; `n` bounds the group
/// size. The quotients carry `cfg.frac_bits` fractional bits and the result
/// is returned on the small ring.
pub fn compute_modified_gini(
    p: &mut Party,
    ctx: &GroupCtx,
    indicators: &[ShareVec],
    n: usize,
    cfg: &TrainConfig,
    conv: &mut ConversionContext,
) -> Result<ShareVec> {
    let v = indicators.len();
    let len = ctx.len();
    let one = ShareVec::constant(p.id(), cfg.small, 1, len);
    let mut xs: Vec<&ShareVec> = vec![&one];
    xs.extend(indicators);
    let (pre, tot) = ctx.prefix_and_sum(p, &xs)?;
    let mut parts = vec![pre[0].clone(), tot[0].sub(&pre[0])?];
    parts.extend(pre[1..].iter().cloned());
    for l in 1..=v {
        parts.push(tot[l].sub(&pre[l])?);
    }
    let all = ShareVec::concat(&parts.iter().collect::<Vec<_>>())?;
    if conv.available() < all.len() {
        conv.fill(p, all.len() - conv.available())?;
    }
    let big = convert_share(p, &all, conv)?.chunks(2 + 2 * v)?;
    let pairs: Vec<(&ShareVec, &ShareVec)> = big[2..].iter().map(|c| (c, c)).collect();
    let sq = mul_many(p, &pairs)?;
    let sum = |vs: &[ShareVec]| -> Result<ShareVec> {
        vs.iter().skip(1).try_fold(vs[0].clone(), |acc, x| acc.add(x))
    };
    let num = ShareVec::concat(&[&sum(&sq[..v])?, &sum(&sq[v..])?])?;
    let den = ShareVec::concat(&[&big[0], &big[1]])?;
    let q = sec_div(p, &num, &den, TrainConfig::div_bounds(n), cfg.frac_bits)?.chunks(2)?;
    let mut gini = q[0].add(&q[1])?.with_ring(cfg.large)?;
    let shift = cfg.gini_shift(n);
    if shift > 0 {
        gini = sec_trunc(p, &gini, shift)?;
    }
    gini.downcast(cfg.small)
}

/// Trains all nodes of layer `k`.
pub fn train_internal_layer(
    p: &mut Party,
    k: u32,
    spnd: &ShareVec,
    ds: &SecureDataset,
    perms: &[SharedPerm],
    cfg: &TrainConfig,
    conv: &mut ConversionContext,
) -> Result<LayerOutputs> {
    let (n, m, v) = (ds.n, ds.m, ds.v);
    Error::check_len(m, perms.len())?;
    let id = p.id();
    let ring = cfg.small;

    let items: Vec<PermItem> = (0..m)
        .map(|i| {
            let mut vecs = vec![&ds.halves[i], &ds.labels];
            if i == 0 {
                vecs.push(spnd);
            }
            PermItem { perm: &perms[i], vecs }
        })
        .collect();
    let mut sorted = apply_perm_many(p, &items)?;
    let spnd_s = sorted[0].pop().unwrap();
    let a_s: Vec<ShareVec> = sorted.iter().map(|s| s[0].clone()).collect();
    let y_s: Vec<ShareVec> = sorted.iter().map(|s| s[1].clone()).collect();
    let y_cat = ShareVec::concat(&y_s.iter().collect::<Vec<_>>())?;

    // Adjacent node ids, adjacent attribute values and label indicators.
    let y_rep = y_cat.repeat(v);
    let label_ids = constants(id, ring, v, m * n);
    let head = |x: &ShareVec| x.slice(0..n - 1);
    let tail = |x: &ShareVec| x.slice(1..n);
    let mut lhs = vec![head(&spnd_s)];
    let mut rhs = vec![tail(&spnd_s)];
    for a in &a_s {
        lhs.push(head(a));
        rhs.push(tail(a));
    }
    let mut pairs: Vec<(&ShareVec, &ShareVec)> = lhs.iter().zip(&rhs).collect();
    pairs.push((&y_rep, &label_ids));
    let eqs = sec_eq_many(p, &pairs)?;
    let same_node = &eqs[0];
    let one = ShareVec::constant(id, ring, 1, 1);
    let g = ShareVec::concat(&[&one, &same_node.rsub_scalar(1)])?;
    let g_cat = g.repeat(m);
    let (ctx, mut extra) = GroupCtx::with_extra(p, &g_cat, n, &[&g.rsub_scalar(1)])?;
    let alpha = extra.remove(0);

    // A position is a valid split if the next element is in the same node
    // and has a different value.
    let diff: Vec<ShareVec> = eqs[1..=m].iter().map(|e| e.rsub_scalar(1)).collect();
    let vpairs: Vec<(&ShareVec, &ShareVec)> = diff.iter().map(|d| (same_node, d)).collect();
    let valid = mul_many(p, &vpairs)?;
    let zero = ShareVec::zeros(id, ring, 1);
    let valid_cat: Vec<ShareVec> = valid
        .iter()
        .map(|q| ShareVec::concat(&[q, &zero]))
        .collect::<Result<_>>()?;
    let valid_cat = ShareVec::concat(&valid_cat.iter().collect::<Vec<_>>())?;

    let indicators = eqs[m + 1].chunks(v)?;
    let gini = compute_modified_gini(p, &ctx, &indicators, n, cfg, conv)?;
    let min = ring.min_signed();
    let masked = mul(p, &valid_cat, &gini.add_scalar(ring.neg(min)))?.add_scalar(min);

    let thresholds: Vec<ShareVec> = a_s
        .iter()
        .map(|a| {
            let mid = head(a).add(&tail(a))?;
            ShareVec::concat(&[&mid, &a.slice(n - 1..n).mul_scalar(2)])
        })
        .collect::<Result<_>>()?;
    let t_cat = ShareVec::concat(&thresholds.iter().collect::<Vec<_>>())?;
    let (gmax, thr) = ctx.group_max_pair(p, &masked, &t_cat)?;
    let best_gini = gmax.chunks(m)?;
    let payloads: Vec<Vec<ShareVec>> = thr
        .chunks(m)?
        .into_iter()
        .enumerate()
        .map(|(i, t)| vec![t, ShareVec::constant(id, ring, i as u128, n)])
        .collect();
    let (_, mut best) = vect_max(p, &best_gini, &payloads)?;
    let spth_s = best.remove(0);
    let spat_s = best.remove(0);

    let f = format_layer_with(p, &alpha, k, &[&spnd_s, &spat_s, &spth_s])?;
    let mut orig = unapply_perm_many(
        p,
        &[PermItem {
            perm: &perms[0],
            vecs: vec![&spat_s, &spth_s],
        }],
    )?
    .remove(0);
    let spth = orig.pop().unwrap();
    let spat = orig.pop().unwrap();
    let mut f = f.into_iter();
    Ok(LayerOutputs {
        spat,
        spth,
        layer: SharedSplitLayer {
            nid: f.next().unwrap(),
            attr: f.next().unwrap(),
            threshold: f.next().unwrap(),
        },
        best_gini,
    })
}

/// b[j] = [x[j] < spth[j]] where x[j] is the working value of attribute
/// spat[j] of sample j.
pub fn test_samples(p: &mut Party, ds: &SecureDataset, spat: &ShareVec, spth: &ShareVec) -> Result<ShareVec> {
    Error::check_len(ds.n, spat.len())?;
    Error::check_len(ds.n, spth.len())?;
    let x = if ds.m == 1 {
        ds.attr(0)
    } else {
        let ids = constants(p.id(), ds.ring(), ds.m, ds.n);
        let sel = sec_eq(p, &spat.repeat(ds.m), &ids)?.chunks(ds.m)?;
        let attrs: Vec<ShareVec> = (0..ds.m).map(|i| ds.attr(i)).collect();
        let pairs: Vec<(&ShareVec, &ShareVec)> = attrs.iter().zip(&sel).collect();
        let picked = mul_many(p, &pairs)?;
        picked.iter().skip(1).try_fold(picked[0].clone(), |acc, x| acc.add(x))?
    };
    sec_lt(p, &x, spth)
}

/// The most common label of every node (ties go to the larger label).
pub fn train_leaf_layer(
    p: &mut Party,
    h: u32,
    pi0: &SharedPerm,
    spnd: &ShareVec,
    labels: &ShareVec,
    v: usize,
) -> Result<SharedLeafLayer> {
    let n = spnd.len();
    let id = p.id();
    let ring = spnd.ring();
    let mut s = apply_perm_many(p, &[PermItem { perm: pi0, vecs: vec![spnd, labels] }])?.remove(0);
    let y_s = s.pop().unwrap();
    let spnd_s = s.pop().unwrap();
    let y_rep = y_s.repeat(v);
    let ids = constants(id, ring, v, n);
    let (prev, cur) = (spnd_s.slice(0..n - 1), spnd_s.slice(1..n));
    let eqs = sec_eq_many(p, &[(&prev, &cur), (&y_rep, &ids)])?;
    let one = ShareVec::constant(id, ring, 1, 1);
    let g = ShareVec::concat(&[&one, &eqs[0].rsub_scalar(1)])?;
    let ctx = GroupCtx::new(p, &g, n)?;
    let ind = eqs[1].chunks(v)?;
    let (_, counts) = ctx.prefix_and_sum(p, &ind.iter().collect::<Vec<_>>())?;
    let payloads: Vec<Vec<ShareVec>> = (0..v)
        .map(|l| vec![ShareVec::constant(id, ring, l as u128, n)])
        .collect();
    let (_, mut lab) = vect_max(p, &counts, &payloads)?;
    let label = lab.remove(0);
    let mut f = format_layer_with(p, ctx.head_perm(), h, &[&spnd_s, &label])?.into_iter();
    Ok(SharedLeafLayer {
        nid: f.next().unwrap(),
        label: f.next().unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::open_model;
    use crate::oracle::{plain_train_paths, GiniMode};
    use crate::rss::reconstruct;
    use crate::rss::testutil::run_on_inputs;
    use crate::session::{run_session, SessionConfig};
    use crate::transport::SessionMeter;
    use proptest::prelude::*;

    fn r32() -> RingConfig {
        RingConfig::integer(32).unwrap()
    }

    /// Trains on three parties and opens the tree to everyone.
    fn secure_train(ds: &PlainDataset, h: u32, seed: u64) -> (crate::TreeModel, Vec<u64>, usize, SessionMeter) {
        let cfg = TrainConfig::new(h, 32, 128, None, ds.n()).unwrap().with_scale(ds.scale);
        let data = ds.clone();
        let out = run_session(&SessionConfig::inproc(seed), move |p| {
            let sds = SecureDataset::input(p, 0, (p.id() == 0).then_some(&data), cfg.small)?;
            let t = train_decision_tree(p, &sds, &cfg)?;
            let model = open_model(p, &t.tree, None)?.unwrap();
            Ok((model, t.leaf_nids, t.gen_perm_calls))
        })
        .unwrap();
        let shares: Vec<ShareVec> = out.outputs.iter().map(|o| o.1.clone()).collect();
        let nids = reconstruct(&shares).unwrap().into_iter().map(|v| v as u64).collect();
        let [a, b, c] = out.outputs;
        assert_eq!(a.0, b.0);
        assert_eq!(a.0, c.0);
        (a.0, nids, a.2, out.meter)
    }

    fn plain(attrs: Vec<Vec<i128>>, labels: Vec<u64>, v: usize) -> PlainDataset {
        let attrs = attrs.into_iter().map(|c| c.into_iter().map(|x| 2 * x).collect()).collect();
        PlainDataset::new(attrs, labels, v, 1).unwrap()
    }

    #[test]
    fn toy_tree_matches_hand_computation() {
        let ds = plain(vec![vec![1, 2, 3, 4]], vec![0, 0, 1, 1], 2);
        let (model, nids, calls, _) = secure_train(&ds, 1, 1);
        assert_eq!(model.internal[0].len(), 1);
        assert_eq!(model.internal[0][0].attr, 0);
        assert_eq!(model.internal[0][0].threshold, 5);
        let labels: Vec<(u64, u64)> = model.leaves.iter().map(|l| (l.nid, l.label)).collect();
        assert_eq!(labels, vec![(1, 1), (2, 0)]);
        assert_eq!(nids, vec![2, 2, 1, 1]);
        assert_eq!(calls, 1);
        assert_eq!(ds.accuracy(&model).unwrap(), 1.0);
    }

    #[test]
    fn second_attribute_selected_when_it_separates() {
        let ds = plain(vec![vec![1, 2, 3, 4], vec![4, 1, 3, 2]], vec![1, 0, 1, 0], 2);
        let (model, _, calls, _) = secure_train(&ds, 1, 2);
        assert_eq!(model.internal[0][0].attr, 1);
        assert_eq!(calls, 2);
    }

    #[test]
    fn single_sample_and_pure_labels() {
        let ds = plain(vec![vec![3], vec![5]], vec![0], 1);
        let (model, _, _, _) = secure_train(&ds, 2, 3);
        let (want, _) = plain_train_paths(&ds, 2, GiniMode::fixed_for(1, 32, 0));
        assert_eq!(model.internal, want.internal);
        assert_eq!(model.leaves, want.leaves);

        let ds = plain(vec![vec![1, 5, 2, 7]], vec![1, 1, 1, 1], 2);
        let (model, _, _, _) = secure_train(&ds, 1, 4);
        assert!(model.leaves.iter().all(|l| l.label == 1));
    }

    #[test]
    fn layer_gini_and_threshold_on_toy() {
        let ring = r32();
        let cfg = TrainConfig::new(1, 32, 128, None, 4).unwrap();
        let (out, _) = run_on_inputs(5, ring, &[vec![1, 2, 3, 4], vec![0, 0, 1, 1]], move |p, xs| {
            let ds = SecureDataset {
                halves: vec![xs[0].clone()],
                labels: xs[1].clone(),
                n: 4,
                m: 1,
                v: 2,
            };
            let pi = crate::sort::identity(p.id(), ring, 4);
            let spnd = ShareVec::zeros(p.id(), ring, 4);
            let mut conv = ConversionContext::new(cfg.small, cfg.large)?;
            let o = train_internal_layer(p, 0, &spnd, &ds, &[pi], &cfg, &mut conv)?;
            Ok(vec![o.spat, o.spth, o.best_gini[0].clone()])
        });
        assert_eq!(out[0], vec![0; 4]);
        assert_eq!(out[1], vec![5; 4]);
        // f = 4: the best split scores exactly 4.
        assert_eq!(out[2], vec![4 << 4; 4]);
    }

    #[test]
    fn gini_values_on_one_group() {
        let ring = r32();
        let cfg = TrainConfig::new(1, 32, 128, Some(12), 4).unwrap();
        let (out, meter) = run_on_inputs(6, ring, &[vec![1, 0, 0, 0], vec![0, 0, 1, 1]], move |p, xs| {
            let ctx = GroupCtx::new(p, &xs[0], 4)?;
            let ids = constants(p.id(), ring, 2, 4);
            let ind = sec_eq(p, &xs[1].repeat(2), &ids)?.chunks(2)?;
            let mut conv = ConversionContext::new(cfg.small, cfg.large)?;
            Ok(vec![compute_modified_gini(p, &ctx, &ind, 4, &cfg, &mut conv)?])
        });
        let f = 1u128 << 12;
        assert_eq!(&out[0][..3], &[f + 5 * f / 3, 4 * f, 5 * f / 3 + f]);
        assert!(meter.rounds(Phase::Offline) > 0);
    }

    #[test]
    fn update_perms_example() {
        let ring = r32();
        let (out, _) = run_on_inputs(7, ring, &[vec![1, 0, 1, 0]], move |p, xs| {
            let pi = crate::sort::identity(p.id(), ring, 4);
            update_perms(p, &xs[0], &[pi])
        });
        assert_eq!(out[0], vec![2, 0, 3, 1]);
    }

    #[test]
    fn test_samples_example() {
        let ring = r32();
        let (out, _) = run_on_inputs(8, ring, &[vec![1, 5], vec![9, 2], vec![1, 1], vec![8, 8]], move |p, xs| {
            let ds = SecureDataset {
                halves: vec![xs[0].clone(), xs[1].clone()],
                labels: ShareVec::zeros(p.id(), ring, 2),
                n: 2,
                m: 2,
                v: 1,
            };
            // Thresholds are in doubled units: 4 becomes 8.
            Ok(vec![test_samples(p, &ds, &xs[2], &xs[3])?])
        });
        assert_eq!(out[0], vec![0, 1]);
    }

    #[test]
    fn advance_spnd_example() {
        let ring = r32();
        let (out, _) = run_on_inputs(9, ring, &[vec![0, 0, 1], vec![0, 1, 1]], |_, xs| {
            Ok(vec![advance_spnd(&xs[0], &xs[1])?])
        });
        assert_eq!(out[0], vec![1, 2, 4]);
    }

    #[test]
    fn format_layer_example() {
        let ring = r32();
        let (out, _) = run_on_inputs(10, ring, &[vec![1, 0, 1, 0], vec![5, 5, 9, 9]], |p, xs| {
            format_layer(p, 1, &xs[0], &[&xs[1]])
        });
        assert_eq!(out[0], vec![5, 9]);
    }

    #[test]
    fn leaf_majority_with_ties_to_the_larger_label() {
        let ring = r32();
        let (out, _) = run_on_inputs(11, ring, &[vec![3, 3, 3, 4, 4, 5, 5], vec![0, 0, 1, 1, 1, 0, 1]], |p, xs| {
            let pi = crate::sort::identity(p.id(), ring, 7);
            let l = train_leaf_layer(p, 2, &pi, &xs[0], &xs[1], 2)?;
            Ok(vec![l.nid, l.label])
        });
        assert_eq!(&out[0][..3], &[3, 4, 5]);
        assert_eq!(&out[1][..3], &[0, 1, 1]);
    }

    #[test]
    fn config_rejects_bad_parameters() {
        assert!(TrainConfig::new(0, 32, 128, None, 10).is_err());
        assert!(TrainConfig::new(3, 32, 32, None, 10).is_err());
        assert!(TrainConfig::new(31, 32, 128, None, 10).is_err());
        assert!(TrainConfig::new(3, 32, 128, None, 0).is_err());
        let cfg = TrainConfig::new(3, 32, 128, None, 1000).unwrap();
        assert_eq!(cfg.frac_bits, 20);
        assert_eq!(cfg.gini_shift(1000), 0);
        assert!(TrainConfig::new(3, 32, 128, None, 8191).is_ok());
        assert!(TrainConfig::new(3, 32, 128, None, 8192).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn matches_the_plain_trainer(
            rows in prop::collection::vec((0i128..8, -4i128..4, 0u64..3), 2..24),
            h in 1u32..3,
            seed in any::<u64>(),
        ) {
            let ds = plain(
                vec![rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect()],
                rows.iter().map(|r| r.2).collect(),
                3,
            );
            let cfg = TrainConfig::new(h, 32, 128, None, ds.n()).unwrap();
            let (model, nids, calls, _) = secure_train(&ds, h, seed);
            let (want, want_nids) = plain_train_paths(&ds, h, GiniMode::fixed_for(ds.n(), 32, cfg.frac_bits));
            prop_assert_eq!(&model.internal, &want.internal);
            prop_assert_eq!(&model.leaves, &want.leaves);
            prop_assert_eq!(&nids, &want_nids);
            prop_assert_eq!(calls, 2);
            for j in 0..ds.n() {
                prop_assert_eq!(model.leaf_of(&ds.row(j)).unwrap(), nids[j]);
            }
        }
    }
}
