//! Trained trees: the shared layers produced by training, their opened
//! plaintext form, prediction, and the two file formats.
//!
//! Thresholds are kept in doubled quantized units (the unit attributes are
//! compared in during training). `scale` is the quantization factor, so a
//! threshold t corresponds to t / (2 * scale) in the original units.
//!
//! Text format, one record per line:
//!
//! ```text
//! rsstree-model 1
//! meta attrs=<m> labels=<v> height=<h> scale=<s> frac=<f>
//! split layer=<k> nid=<j> attr=<i> threshold=<num>/<den>
//! leaf layer=<h> nid=<j> label=<l>
//! ```
//!
//! Thresholds are printed as reduced rationals in original units, with the
//! denominator omitted when it is 1. Blank lines and lines starting with
//! `#` are ignored.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ring::{read_vec, write_vec, RingConfig};
use crate::rss::ShareVec;
use crate::session::Party;
use crate::transport::{next, prev, MsgWriter, Outbox, PartyId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelMeta {
    pub num_attrs: usize,
    pub num_labels: usize,
    pub height: u32,
    pub scale: u128,
    pub frac_bits: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Split {
    pub nid: u64,
    pub attr: usize,
    pub threshold: i128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Leaf {
    pub nid: u64,
    pub label: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeModel {
    pub meta: ModelMeta,
    /// Layers 0..h, nodes sorted by nid.
    pub internal: Vec<Vec<Split>>,
    pub leaves: Vec<Leaf>,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `t / (2 * scale)` as a reduced fraction.
pub fn threshold_rational(t: i128, scale: u128) -> (i128, u128) {
    let den = 2 * scale;
    let g = gcd(t.unsigned_abs(), den).max(1);
    (t / g as i128, den / g)
}

fn layer_range(k: u32) -> std::ops::RangeInclusive<u64> {
    ((1u64 << k) - 1)..=((1u64 << (k + 1)) - 2)
}

impl TreeModel {
    pub fn height(&self) -> u32 {
        self.meta.height
    }

    /// Checks layer count, nid ranges, ordering and payload bounds.
    pub fn validate(&self) -> Result<()> {
        let m = &self.meta;
        if self.internal.len() != m.height as usize {
            return Err(Error::Model(format!(
                "{} internal layers for height {}",
                self.internal.len(),
                m.height
            )));
        }
        for (k, layer) in self.internal.iter().enumerate() {
            if layer.is_empty() {
                return Err(Error::Model(format!("internal layer {k} is empty")));
            }
            let range = layer_range(k as u32);
            for w in layer.windows(2) {
                if w[0].nid >= w[1].nid {
                    return Err(Error::Model(format!("layer {k} nids not increasing")));
                }
            }
            for s in layer {
                if !range.contains(&s.nid) {
                    return Err(Error::Model(format!("nid {} outside layer {k}", s.nid)));
                }
                if s.attr >= m.num_attrs {
                    return Err(Error::Model(format!("attribute {} out of range", s.attr)));
                }
            }
        }
        if self.leaves.is_empty() {
            return Err(Error::Model("leaf layer is empty".into()));
        }
        let range = layer_range(m.height);
        for w in self.leaves.windows(2) {
            if w[0].nid >= w[1].nid {
                return Err(Error::Model("leaf nids not increasing".into()));
            }
        }
        for l in &self.leaves {
            if !range.contains(&l.nid) {
                return Err(Error::Model(format!("leaf nid {} outside layer {}", l.nid, m.height)));
            }
            if l.label as usize >= m.num_labels {
                return Err(Error::Model(format!("label {} out of range", l.label)));
            }
        }
        Ok(())
    }

    /// Walks from the root; `sample` holds doubled quantized attributes.
    /// Samples with a value below the threshold go to child 2j+2, the others
    /// to 2j+1. A child that received no training samples is absent from the
    /// model, and the walk continues at its sibling instead.
    pub fn predict(&self, sample: &[i128]) -> Result<u64> {
        if sample.len() != self.meta.num_attrs {
            return Err(Error::Length {
                expected: self.meta.num_attrs,
                got: sample.len(),
            });
        }
        let mut nid = 0u64;
        for layer in &self.internal {
            let s = find_or_sibling(layer, nid, |s| s.nid)?;
            let b = u64::from(sample[s.attr] < s.threshold);
            nid = 2 * s.nid + 1 + b;
        }
        Ok(find_or_sibling(&self.leaves, nid, |l| l.nid)?.label)
    }

    /// Like [`predict`](Self::predict) but returns the leaf nid.
    pub fn leaf_of(&self, sample: &[i128]) -> Result<u64> {
        let mut nid = 0u64;
        for layer in &self.internal {
            let s = find_or_sibling(layer, nid, |s| s.nid)?;
            nid = 2 * s.nid + 1 + u64::from(sample[s.attr] < s.threshold);
        }
        Ok(find_or_sibling(&self.leaves, nid, |l| l.nid)?.nid)
    }

    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut out = String::from("rsstree-model 1\n");
        let _ = writeln!(
            out,
            "meta attrs={} labels={} height={} scale={} frac={}",
            m.num_attrs, m.num_labels, m.height, m.scale, m.frac_bits
        );
        for (k, layer) in self.internal.iter().enumerate() {
            for s in layer {
                let (num, den) = threshold_rational(s.threshold, m.scale);
                let t = if den == 1 { num.to_string() } else { format!("{num}/{den}") };
                let _ = writeln!(out, "split layer={k} nid={} attr={} threshold={t}", s.nid, s.attr);
            }
        }
        for l in &self.leaves {
            let _ = writeln!(out, "leaf layer={} nid={} label={}", m.height, l.nid, l.label);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<TreeModel> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let bad = |line: usize, msg: &str| Error::Model(format!("line {line}: {msg}"));
        match lines.next() {
            Some((_, "rsstree-model 1")) => {}
            Some((i, _)) => return Err(bad(i, "expected header `rsstree-model 1`")),
            None => return Err(Error::Model("empty model file".into())),
        }
        let (i, meta_line) = lines.next().ok_or_else(|| Error::Model("missing meta line".into()))?;
        let f = fields(i, meta_line, "meta", &["attrs", "labels", "height", "scale", "frac"])?;
        let meta = ModelMeta {
            num_attrs: num(i, &f[0])?,
            num_labels: num(i, &f[1])?,
            height: num(i, &f[2])?,
            scale: num(i, &f[3])?,
            frac_bits: num(i, &f[4])?,
        };
        if meta.scale == 0 {
            return Err(bad(i, "scale must be positive"));
        }
        if meta.height > 62 {
            return Err(bad(i, "height too large"));
        }
        let mut internal = vec![Vec::new(); meta.height as usize];
        let mut leaves = Vec::new();
        for (i, line) in lines {
            if line.starts_with("split ") {
                let f = fields(i, line, "split", &["layer", "nid", "attr", "threshold"])?;
                let k: usize = num(i, &f[0])?;
                if k >= internal.len() {
                    return Err(bad(i, "split layer beyond height"));
                }
                let threshold = parse_threshold(i, &f[3], meta.scale)?;
                internal[k].push(Split {
                    nid: num(i, &f[1])?,
                    attr: num(i, &f[2])?,
                    threshold,
                });
            } else if line.starts_with("leaf ") {
                let f = fields(i, line, "leaf", &["layer", "nid", "label"])?;
                let k: u32 = num(i, &f[0])?;
                if k != meta.height {
                    return Err(bad(i, "leaf record outside the last layer"));
                }
                leaves.push(Leaf {
                    nid: num(i, &f[1])?,
                    label: num(i, &f[2])?,
                });
            } else {
                return Err(bad(i, "unknown record"));
            }
        }
        let model = TreeModel { meta, internal, leaves };
        model.validate()?;
        Ok(model)
    }
}

fn find_or_sibling<T>(layer: &[T], nid: u64, key: impl Fn(&T) -> u64) -> Result<&T> {
    let find = |j: u64| layer.binary_search_by_key(&j, &key).ok().map(|i| &layer[i]);
    if let Some(x) = find(nid) {
        return Ok(x);
    }
    let sibling = if nid == 0 {
        None
    } else if nid % 2 == 1 {
        Some(nid + 1)
    } else {
        Some(nid - 1)
    };
    sibling
        .and_then(find)
        .ok_or_else(|| Error::Model(format!("node {nid} and its sibling are both missing")))
}

fn fields(line: usize, text: &str, tag: &str, keys: &[&str]) -> Result<Vec<String>> {
    let mut parts = text.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(Error::Model(format!("line {line}: expected `{tag}` record")));
    }
    let parts: Vec<&str> = parts.collect();
    if parts.len() != keys.len() {
        return Err(Error::Model(format!(
            "line {line}: `{tag}` needs {} fields, found {}",
            keys.len(),
            parts.len()
        )));
    }
    parts
        .iter()
        .zip(keys)
        .map(|(p, k)| {
            p.strip_prefix(k)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| Error::Model(format!("line {line}: expected `{k}=`, found `{p}`")))
        })
        .collect()
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Model(format!("line {line}: `{s}` is not a valid number")))
}

fn parse_threshold(line: usize, s: &str, scale: u128) -> Result<i128> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (num::<i128>(line, n)?, num::<u128>(line, d)?),
        None => (num::<i128>(line, s)?, 1),
    };
    if d == 0 {
        return Err(Error::Model(format!("line {line}: zero denominator")));
    }
    let scaled = n
        .checked_mul(2 * scale as i128)
        .ok_or_else(|| Error::Model(format!("line {line}: threshold overflows")))?;
    if scaled % d as i128 != 0 {
        return Err(Error::Model(format!(
            "line {line}: threshold {s} is not a multiple of 1/{}",
            2 * scale
        )));
    }
    Ok(scaled / d as i128)
}

/// One party's shares of an internal layer. Entries may repeat a node when
/// the layer holds fewer nodes than slots.
#[derive(Clone, Debug)]
pub struct SharedSplitLayer {
    pub nid: ShareVec,
    pub attr: ShareVec,
    pub threshold: ShareVec,
}

#[derive(Clone, Debug)]
pub struct SharedLeafLayer {
    pub nid: ShareVec,
    pub label: ShareVec,
}

/// One party's view of a trained tree.
#[derive(Clone, Debug)]
pub struct SharedTree {
    pub meta: ModelMeta,
    pub internal: Vec<SharedSplitLayer>,
    pub leaf: SharedLeafLayer,
}

const SHARED_MAGIC: &[u8; 4] = b"RSSM";

impl SharedTree {
    fn vectors(&self) -> Vec<&ShareVec> {
        let mut v = Vec::new();
        for l in &self.internal {
            v.extend([&l.nid, &l.attr, &l.threshold]);
        }
        v.extend([&self.leaf.nid, &self.leaf.label]);
        v
    }

    /// Binary form of this party's shares: magic, party id, ring width,
    /// metadata, then every vector as two length-prefixed components.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let first = &self.leaf.nid;
        let ring = first.ring();
        let mut out = Vec::new();
        out.extend_from_slice(SHARED_MAGIC);
        out.push(first.owner() as u8);
        out.extend_from_slice(&ring.width().to_le_bytes());
        let m = &self.meta;
        for v in [m.num_attrs as u64, m.num_labels as u64, m.height as u64, m.frac_bits as u64] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&m.scale.to_le_bytes());
        for v in self.vectors() {
            let (a, b) = v.components();
            write_vec(&mut out, a, ring)?;
            write_vec(&mut out, b, ring)?;
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SharedTree> {
        let short = || Error::Decode("truncated shared model".into());
        if bytes.len() < 4 + 1 + 4 + 32 + 16 || &bytes[..4] != SHARED_MAGIC {
            return Err(Error::Decode("not a shared model file".into()));
        }
        let owner = bytes[4] as PartyId;
        if owner > 2 {
            return Err(Error::Decode(format!("party id {owner} in shared model")));
        }
        let width = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
        let ring = RingConfig::integer(width)?;
        let mut pos = 9;
        let mut u64s = [0u64; 4];
        for v in &mut u64s {
            *v = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
            pos += 8;
        }
        let scale = u128::from_le_bytes(bytes[pos..pos + 16].try_into().unwrap());
        pos += 16;
        let meta = ModelMeta {
            num_attrs: u64s[0] as usize,
            num_labels: u64s[1] as usize,
            height: u32::try_from(u64s[2]).map_err(|_| Error::Decode("height".into()))?,
            frac_bits: u32::try_from(u64s[3]).map_err(|_| Error::Decode("frac".into()))?,
            scale,
        };
        if meta.height > 62 {
            return Err(Error::Decode("height too large".into()));
        }
        let read = |pos: &mut usize| -> Result<ShareVec> {
            let rest = bytes.get(*pos..).ok_or_else(short)?;
            let (a, used) = read_vec(rest, ring)?;
            *pos += used;
            let (b, used) = read_vec(&bytes[*pos..], ring)?;
            *pos += used;
            ShareVec::from_components(owner, ring, a, b)
        };
        let mut internal = Vec::new();
        for _ in 0..meta.height {
            internal.push(SharedSplitLayer {
                nid: read(&mut pos)?,
                attr: read(&mut pos)?,
                threshold: read(&mut pos)?,
            });
        }
        let leaf = SharedLeafLayer {
            nid: read(&mut pos)?,
            label: read(&mut pos)?,
        };
        if pos != bytes.len() {
            return Err(Error::Decode("trailing bytes after shared model".into()));
        }
        Ok(SharedTree { meta, internal, leaf })
    }
}

/// Opens `x` to `to` (or to everyone). The missing component is received
/// from both other parties and compared. One round.
fn open_checked(p: &mut Party, x: &ShareVec, to: Option<PartyId>) -> Result<Option<Vec<u128>>> {
    let id = p.id();
    let ring = x.ring();
    let (a, b) = x.components();
    let gets = |r: PartyId| to.is_none_or(|t| t == r);
    let mut out = Outbox::new();
    // prev(id) misses component id+1 = our b; next(id) misses component id = our a.
    if gets(prev(id)) {
        let mut m = MsgWriter::new();
        m.ring(b, ring);
        out.send(prev(id), m);
    }
    if gets(next(id)) {
        let mut m = MsgWriter::new();
        m.ring(a, ring);
        out.send(next(id), m);
    }
    if gets(id) {
        out.expect(next(id)).expect(prev(id));
    }
    let mut inbox = p.exchange(out)?;
    if !gets(id) {
        return Ok(None);
    }
    let mut r1 = inbox.take(next(id))?;
    let c1 = r1.ring(x.len(), ring)?;
    r1.finish()?;
    let mut r2 = inbox.take(prev(id))?;
    let c2 = r2.ring(x.len(), ring)?;
    r2.finish()?;
    if c1 != c2 {
        return Err(Error::Integrity(format!(
            "parties {} and {} disagree on a model share",
            next(id),
            prev(id)
        )));
    }
    Ok(Some(
        (0..x.len())
            .map(|j| ring.add(ring.add(a[j], b[j]), c1[j]))
            .collect(),
    ))
}

/// Opens a shared tree to party `to`, or to all parties when `to` is
/// `None`. Repeated slots are merged and nodes sorted by nid.
pub fn open_model(p: &mut Party, tree: &SharedTree, to: Option<PartyId>) -> Result<Option<TreeModel>> {
    let vecs = tree.vectors();
    let lens: Vec<usize> = vecs.iter().map(|v| v.len()).collect();
    let all = ShareVec::concat(&vecs)?;
    let ring = all.ring();
    let Some(opened) = open_checked(p, &all, to)? else {
        return Ok(None);
    };
    let mut parts = Vec::with_capacity(lens.len());
    let mut pos = 0;
    for l in lens {
        parts.push(&opened[pos..pos + l]);
        pos += l;
    }
    let signed = |v: u128| ring.to_signed(v);
    let as_u64 = |v: u128| -> Result<u64> {
        u64::try_from(signed(v)).map_err(|_| Error::Integrity(format!("negative node field {}", signed(v))))
    };
    let mut internal = Vec::new();
    for k in 0..tree.meta.height as usize {
        let (nid, attr, thr) = (parts[3 * k], parts[3 * k + 1], parts[3 * k + 2]);
        let mut layer: Vec<Split> = Vec::new();
        for j in 0..nid.len() {
            layer.push(Split {
                nid: as_u64(nid[j])?,
                attr: as_u64(attr[j])? as usize,
                threshold: signed(thr[j]),
            });
        }
        layer.sort_by_key(|s| s.nid);
        layer.dedup_by_key(|s| s.nid);
        internal.push(layer);
    }
    let h = tree.meta.height as usize;
    let (nid, label) = (parts[3 * h], parts[3 * h + 1]);
    let mut leaves = Vec::new();
    for j in 0..nid.len() {
        leaves.push(Leaf {
            nid: as_u64(nid[j])?,
            label: as_u64(label[j])?,
        });
    }
    leaves.sort_by_key(|l| l.nid);
    leaves.dedup_by_key(|l| l.nid);
    let model = TreeModel {
        meta: tree.meta,
        internal,
        leaves,
    };
    model.validate().map_err(|e| Error::Integrity(format!("opened model is inconsistent: {e}")))?;
    Ok(Some(model))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy() -> TreeModel {
        TreeModel {
            meta: ModelMeta {
                num_attrs: 1,
                num_labels: 2,
                height: 1,
                scale: 1,
                frac_bits: 4,
            },
            internal: vec![vec![Split { nid: 0, attr: 0, threshold: 5 }]],
            leaves: vec![Leaf { nid: 1, label: 1 }, Leaf { nid: 2, label: 0 }],
        }
    }

    #[test]
    fn toy_predictions_follow_the_branch_rule() {
        let m = toy();
        // a = 1 (doubled: 2) is below 2.5, so it goes to nid 2.
        assert_eq!(m.predict(&[2]).unwrap(), 0);
        assert_eq!(m.predict(&[8]).unwrap(), 1);
        // Equal to the threshold is not below it.
        assert_eq!(m.leaf_of(&[5]).unwrap(), 1);
    }

    #[test]
    fn missing_child_falls_back_to_sibling() {
        let mut m = toy();
        m.leaves.remove(1);
        assert_eq!(m.predict(&[2]).unwrap(), 1);
        m.leaves.clear();
        assert!(m.predict(&[2]).is_err());
    }

    #[test]
    fn golden_text() {
        let text = include_str!("../tests/data/toy_model.txt");
        let m = TreeModel::from_text(text).unwrap();
        assert_eq!(m, toy());
        assert_eq!(m.to_text(), text);
    }

    #[test]
    fn rational_thresholds() {
        assert_eq!(threshold_rational(5, 1), (5, 2));
        assert_eq!(threshold_rational(-40, 10), (-2, 1));
        assert_eq!(threshold_rational(0, 10), (0, 1));
        let mut m = toy();
        m.meta.scale = 100;
        m.internal[0][0].threshold = 4901;
        assert_eq!(TreeModel::from_text(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn malformed_text_is_rejected() {
        assert!(TreeModel::from_text("").is_err());
        assert!(TreeModel::from_text("rsstree-model 1\nmeta attrs=1\n").is_err());
        let t = toy().to_text().replace("attr=0", "attr=3");
        assert!(matches!(TreeModel::from_text(&t), Err(Error::Model(_))));
        let t = toy().to_text().replace("threshold=5/2", "threshold=1/3");
        assert!(TreeModel::from_text(&t).is_err());
    }
}
