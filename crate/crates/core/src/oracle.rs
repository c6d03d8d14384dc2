//! Plaintext reference implementations used as test oracles.
//!
//! Tie rules, shared with the secure protocols:
//! - within an attribute, the last maximal split position of a node wins;
//! - across attributes, the last attribute with the maximal score wins;
//! - a leaf takes the largest label among the most frequent ones.
//!
//! Invalid split positions (the last element of a node, or a position
//! whose attribute value equals the next one) score below every valid
//! position. When a node has no valid position the last element of the node
//! in the order of attribute m-1 is chosen, with the threshold it would have
//! had as a split point in that order.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{Leaf, ModelMeta, Split, TreeModel};

/// Integer attributes (already doubled, so every value is even) and labels
/// in [0, num_labels).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlainDataset {
    /// Column-major: `attrs[i][j]` is attribute i of sample j.
    pub attrs: Vec<Vec<i128>>,
    pub labels: Vec<u64>,
    pub num_labels: usize,
    /// Quantization factor carried into the model metadata.
    pub scale: u128,
}

impl PlainDataset {
    pub fn new(attrs: Vec<Vec<i128>>, labels: Vec<u64>, num_labels: usize, scale: u128) -> Result<Self> {
        let n = labels.len();
        if n == 0 || attrs.is_empty() {
            return Err(Error::config("dataset needs at least one sample and one attribute"));
        }
        for col in &attrs {
            Error::check_len(n, col.len())?;
            if col.iter().any(|v| v % 2 != 0) {
                return Err(Error::config("attributes must be doubled (even) integers"));
            }
        }
        if let Some(l) = labels.iter().find(|l| **l as usize >= num_labels) {
            return Err(Error::config(format!("label {l} outside [0, {num_labels})")));
        }
        if scale == 0 {
            return Err(Error::config("scale must be positive"));
        }
        Ok(PlainDataset {
            attrs,
            labels,
            num_labels,
            scale,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn m(&self) -> usize {
        self.attrs.len()
    }

    pub fn row(&self, j: usize) -> Vec<i128> {
        self.attrs.iter().map(|c| c[j]).collect()
    }

    /// Samples selected by `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> PlainDataset {
        PlainDataset {
            attrs: self.attrs.iter().map(|c| idx.iter().map(|&j| c[j]).collect()).collect(),
            labels: idx.iter().map(|&j| self.labels[j]).collect(),
            num_labels: self.num_labels,
            scale: self.scale,
        }
    }

    /// Fraction of samples whose label `model` predicts correctly.
    pub fn accuracy(&self, model: &TreeModel) -> Result<f64> {
        let mut ok = 0usize;
        for j in 0..self.n() {
            if model.predict(&self.row(j))? == self.labels[j] {
                ok += 1;
            }
        }
        Ok(ok as f64 / self.n() as f64)
    }
}

/// Destination of every element under a stable ascending sort.
pub fn plain_argsort_stable(keys: &[i128]) -> Vec<usize> {
    let order = sorted_indices(keys);
    let mut rank = vec![0; keys.len()];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r;
    }
    rank
}

/// Indices of `keys` in stable ascending order.
fn sorted_indices(keys: &[i128]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&j| keys[j]);
    order
}

/// (start, end) of each group, end exclusive.
fn groups(g: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut s = 0;
    for j in 1..=g.len() {
        if j == g.len() || g[j] {
            out.push((s, j));
            s = j;
        }
    }
    out
}

pub fn plain_group_sum(g: &[bool], x: &[i64]) -> Vec<i64> {
    let mut out = vec![0; x.len()];
    for (s, e) in groups(g) {
        let t: i64 = x[s..e].iter().sum();
        out[s..e].fill(t);
    }
    out
}

pub fn plain_group_prefix_sum(g: &[bool], x: &[i64]) -> Vec<i64> {
    let mut out = vec![0; x.len()];
    for (s, e) in groups(g) {
        let mut acc = 0;
        for j in s..e {
            acc += x[j];
            out[j] = acc;
        }
    }
    out
}

/// Group maximum of x and the y of its last occurrence, broadcast.
pub fn plain_group_max_pair(g: &[bool], x: &[i64], y: &[i64]) -> (Vec<i64>, Vec<i64>) {
    let mut mx = vec![0; x.len()];
    let mut my = vec![0; x.len()];
    for (s, e) in groups(g) {
        let mut best = s;
        for j in s..e {
            if x[j] >= x[best] {
                best = j;
            }
        }
        mx[s..e].fill(x[best]);
        my[s..e].fill(y[best]);
    }
    (mx, my)
}

/// Per position, the maximum over columns and the index of the last column
/// attaining it.
pub fn plain_vect_max(cols: &[Vec<i64>]) -> (Vec<i64>, Vec<usize>) {
    let n = cols.first().map_or(0, Vec::len);
    let mut mx = Vec::with_capacity(n);
    let mut arg = Vec::with_capacity(n);
    for j in 0..n {
        let mut best = 0;
        for (c, col) in cols.iter().enumerate() {
            if col[j] >= cols[best][j] {
                best = c;
            }
        }
        mx.push(cols[best][j]);
        arg.push(best);
    }
    (mx, arg)
}

/// Non-negative rational compared by cross multiplication.
#[derive(Clone, Copy, Debug)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

impl Ratio {
    pub fn new(num: u128, den: u128) -> Ratio {
        assert!(den > 0, "zero denominator");
        Ratio { num, den }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Ratio {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Ratio {
    fn cmp(&self, o: &Self) -> Ordering {
        (self.num * o.den).cmp(&(o.num * self.den))
    }
}

/// How split scores are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GiniMode {
    /// Exact rationals.
    Exact,
    /// floor(2^frac * pre / ps) + floor(2^frac * suf / ss), then floored by
    /// a further 2^shift: the arithmetic of the secure protocol, which is
    /// bit-exact when shift is 0.
    Fixed { frac: u32, shift: u32 },
}

impl GiniMode {
    /// The fixed-point mode matching training with `n` samples, small ring
    /// width `k` and `frac` fractional bits.
    pub fn fixed_for(n: usize, k: u32, frac: u32) -> GiniMode {
        let shift = (frac + ceil_log2(n as u128)).saturating_sub(k - 1);
        GiniMode::Fixed { frac, shift }
    }
}

pub fn ceil_log2(x: u128) -> u32 {
    if x <= 1 {
        0
    } else {
        128 - (x - 1).leading_zeros()
    }
}

/// Score of a split from per-label counts on each side.
fn score(pre: &[u128], suf: &[u128], mode: GiniMode) -> Ratio {
    let ps: u128 = pre.iter().sum();
    let ss: u128 = suf.iter().sum();
    let pq: u128 = pre.iter().map(|c| c * c).sum();
    let sq: u128 = suf.iter().map(|c| c * c).sum();
    match mode {
        GiniMode::Exact => {
            // An empty side contributes nothing.
            let (ps1, ss1) = (ps.max(1), ss.max(1));
            Ratio::new(pq * ss1 + sq * ps1, ps1 * ss1)
        }
        GiniMode::Fixed { frac, shift } => {
            let t = |q: u128, s: u128| if s == 0 { 0 } else { (q << frac) / s };
            Ratio::new((t(pq, ps) + t(sq, ss)) >> shift, 1)
        }
    }
}

/// Modified Gini of splitting `labels` after position `split` (left side
/// is labels[..=split]).
pub fn plain_modified_gini(labels: &[u64], split: usize, num_labels: usize, mode: GiniMode) -> Ratio {
    let mut pre = vec![0u128; num_labels];
    let mut suf = vec![0u128; num_labels];
    for (j, l) in labels.iter().enumerate() {
        if j <= split {
            pre[*l as usize] += 1;
        } else {
            suf[*l as usize] += 1;
        }
    }
    score(&pre, &suf, mode)
}

/// The conversion identity on plain values: for d0, d1 in [0, 2^k) whose
/// sum is x + ovfl with x in [0, 2^{k-1}), returns (x, ovfl) as computed
/// from the top-bit truncations and the parity correction.
pub fn plain_convert_identity(d0: u128, d1: u128, k: u32) -> (u128, u128) {
    let c = k - 1;
    let t0 = d0 >> c;
    let t1 = d1.div_ceil(1 << c);
    let truncsum = t0 + t1;
    let ovfl = (truncsum - (truncsum & 1)) << c;
    (d0 + d1 - ovfl, ovfl)
}

/// Trains a tree of height `h` in the clear with the same node ordering,
/// masking and tie rules as the secure trainer.
pub fn plain_train(ds: &PlainDataset, h: u32, mode: GiniMode) -> TreeModel {
    plain_train_paths(ds, h, mode).0
}

/// Also returns the leaf nid each training sample ends in.
pub fn plain_train_paths(ds: &PlainDataset, h: u32, mode: GiniMode) -> (TreeModel, Vec<u64>) {
    let (n, m, v) = (ds.n(), ds.m(), ds.num_labels);
    let mut orders: Vec<Vec<usize>> = ds.attrs.iter().map(|c| sorted_indices(c)).collect();
    let mut nid = vec![0u64; n];
    let mut internal = Vec::with_capacity(h as usize);

    for _ in 0..h {
        // best[i][group] = (score, threshold, tail position), groups in the
        // order they appear, which is the same for every attribute.
        let mut per_attr: Vec<Vec<(Option<Ratio>, i128)>> = Vec::with_capacity(m);
        let mut group_nids: Vec<u64> = Vec::new();
        for (i, order) in orders.iter().enumerate() {
            let a: Vec<i128> = order.iter().map(|&j| ds.attrs[i][j]).collect();
            let y: Vec<u64> = order.iter().map(|&j| ds.labels[j]).collect();
            let ids: Vec<u64> = order.iter().map(|&j| nid[j]).collect();
            let g: Vec<bool> = (0..n).map(|j| j == 0 || ids[j] != ids[j - 1]).collect();
            let mut best = Vec::new();
            for (s, e) in groups(&g) {
                if i == 0 {
                    group_nids.push(ids[s]);
                }
                let mut pre = vec![0u128; v];
                let mut suf = vec![0u128; v];
                for l in &y[s..e] {
                    suf[*l as usize] += 1;
                }
                let mut top: (Option<Ratio>, i128) = (None, 0);
                for j in s..e {
                    pre[y[j] as usize] += 1;
                    suf[y[j] as usize] -= 1;
                    let valid = j + 1 < e && a[j] != a[j + 1];
                    let sc = valid.then(|| score(&pre, &suf, mode));
                    let t = if j + 1 < n { (a[j] + a[j + 1]) / 2 } else { a[j] };
                    if sc >= top.0 {
                        top = (sc, t);
                    }
                }
                best.push(top);
            }
            per_attr.push(best);
        }

        let mut layer = Vec::with_capacity(group_nids.len());
        for (gi, &id) in group_nids.iter().enumerate() {
            let mut win = 0;
            for i in 0..m {
                if per_attr[i][gi].0 >= per_attr[win][gi].0 {
                    win = i;
                }
            }
            layer.push(Split {
                nid: id,
                attr: win,
                threshold: per_attr[win][gi].1,
            });
        }
        layer.sort_by_key(|s| s.nid);

        let b: Vec<bool> = (0..n)
            .map(|j| {
                let s = layer[layer.binary_search_by_key(&nid[j], |s| s.nid).unwrap()];
                ds.attrs[s.attr][j] < s.threshold
            })
            .collect();
        for j in 0..n {
            nid[j] = 2 * nid[j] + 1 + u64::from(b[j]);
        }
        for order in &mut orders {
            let (zeros, ones): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&j| !b[j]);
            *order = zeros.into_iter().chain(ones).collect();
        }
        internal.push(layer);
    }

    let mut counts: std::collections::BTreeMap<u64, Vec<u64>> = Default::default();
    for j in 0..n {
        counts.entry(nid[j]).or_insert_with(|| vec![0; v])[ds.labels[j] as usize] += 1;
    }
    let leaves = counts
        .into_iter()
        .map(|(id, c)| {
            let mut best = 0;
            for l in 0..v {
                if c[l] >= c[best] {
                    best = l;
                }
            }
            Leaf { nid: id, label: best as u64 }
        })
        .collect();

    let frac_bits = match mode {
        GiniMode::Exact => 0,
        GiniMode::Fixed { frac, .. } => frac,
    };
    let model = TreeModel {
        meta: ModelMeta {
            num_attrs: m,
            num_labels: v,
            height: h,
            scale: ds.scale,
            frac_bits,
        },
        internal,
        leaves,
    };
    (model, nid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> PlainDataset {
        PlainDataset::new(vec![vec![2, 4, 6, 8]], vec![0, 0, 1, 1], 2, 1).unwrap()
    }

    #[test]
    fn argsort_example() {
        assert_eq!(plain_argsort_stable(&[4, 9, 2, 9, 3]), vec![2, 3, 0, 4, 1]);
    }

    #[test]
    fn group_sum_example() {
        let g = [true, false, true, true, false, false];
        assert_eq!(plain_group_sum(&g, &[4, 3, 2, 8, 9, 0]), vec![7, 7, 2, 17, 17, 17]);
    }

    #[test]
    fn gini_examples() {
        let y = [0, 0, 1, 1];
        assert_eq!(plain_modified_gini(&y, 1, 2, GiniMode::Exact), Ratio::new(4, 1));
        assert_eq!(plain_modified_gini(&y, 0, 2, GiniMode::Exact), Ratio::new(8, 3));
        assert_eq!(plain_modified_gini(&y, 2, 2, GiniMode::Exact), Ratio::new(8, 3));
        let f = GiniMode::Fixed { frac: 4, shift: 0 };
        // floor(16 * 1 / 1) + floor(16 * 5 / 3) = 16 + 26
        assert_eq!(plain_modified_gini(&y, 0, 2, f), Ratio::new(42, 1));
        // One label everywhere: the score is n.
        assert_eq!(plain_modified_gini(&[1; 5], 2, 2, GiniMode::Exact), Ratio::new(5, 1));
    }

    #[test]
    fn toy_tree() {
        let (model, leaves) = plain_train_paths(&toy(), 1, GiniMode::Exact);
        assert_eq!(model.internal[0], vec![Split { nid: 0, attr: 0, threshold: 5 }]);
        assert_eq!(model.leaves, vec![Leaf { nid: 1, label: 1 }, Leaf { nid: 2, label: 0 }]);
        assert_eq!(leaves, vec![2, 2, 1, 1]);
        assert_eq!(toy().accuracy(&model).unwrap(), 1.0);
    }

    #[test]
    fn pure_labels_pick_the_last_candidate() {
        let ds = PlainDataset::new(vec![vec![2, 4, 6]], vec![1, 1, 1], 2, 1).unwrap();
        let model = plain_train(&ds, 1, GiniMode::Exact);
        // Positions 0 and 1 tie at 3; the later one wins.
        assert_eq!(model.internal[0][0].threshold, 5);
        assert!(model.leaves.iter().all(|l| l.label == 1));
    }

    #[test]
    fn second_attribute_wins_when_it_separates() {
        let ds = PlainDataset::new(vec![vec![2, 4, 6, 8], vec![8, 2, 6, 4]], vec![1, 0, 1, 0], 2, 1).unwrap();
        let model = plain_train(&ds, 1, GiniMode::Exact);
        assert_eq!(model.internal[0][0].attr, 1);
        assert_eq!(ds.accuracy(&model).unwrap(), 1.0);
    }

    #[test]
    fn single_sample_is_degenerate() {
        let ds = PlainDataset::new(vec![vec![4], vec![6]], vec![0], 1, 1).unwrap();
        let model = plain_train(&ds, 2, GiniMode::Exact);
        assert_eq!(model.internal[0][0], Split { nid: 0, attr: 1, threshold: 6 });
        assert_eq!(model.leaves.len(), 1);
    }

    #[test]
    fn convert_identity_matches_integer_sum() {
        let k = 8;
        for x in 0..128u128 {
            for d0 in (0..256u128).step_by(7) {
                let d1 = (x + 256 - d0) % 256;
                let (got, ovfl) = plain_convert_identity(d0, d1, k);
                assert_eq!(got, x);
                assert_eq!(ovfl, d0 + d1 - x);
            }
        }
    }

    #[test]
    fn fixed_mode_shift() {
        assert_eq!(GiniMode::fixed_for(64, 32, 12), GiniMode::Fixed { frac: 12, shift: 0 });
        assert_eq!(GiniMode::fixed_for(2048, 32, 22), GiniMode::Fixed { frac: 22, shift: 2 });
    }

    proptest! {
        #[test]
        fn argsort_is_a_stable_sort(keys in prop::collection::vec(-5i128..5, 0..30)) {
            let r = plain_argsort_stable(&keys);
            let mut sorted = vec![0; keys.len()];
            let mut tag = vec![0; keys.len()];
            for (j, &d) in r.iter().enumerate() {
                sorted[d] = keys[j];
                tag[d] = j;
            }
            for d in 1..keys.len() {
                prop_assert!(sorted[d - 1] < sorted[d] || (sorted[d - 1] == sorted[d] && tag[d - 1] < tag[d]));
            }
        }

        #[test]
        fn training_samples_land_in_leaves(rows in prop::collection::vec((0i128..6, 0i128..6, 0u64..3), 1..40), h in 1u32..4) {
            let attrs = vec![rows.iter().map(|r| 2 * r.0).collect(), rows.iter().map(|r| 2 * r.1).collect()];
            let ds = PlainDataset::new(attrs, rows.iter().map(|r| r.2).collect(), 3, 1).unwrap();
            let (model, nids) = plain_train_paths(&ds, h, GiniMode::Exact);
            model.validate().unwrap();
            for j in 0..ds.n() {
                prop_assert_eq!(model.leaf_of(&ds.row(j)).unwrap(), nids[j]);
            }
        }
    }
}
