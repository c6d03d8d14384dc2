//! CSV ingestion.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rsstree_core::PlainDataset;

use crate::CliError;

/// A loaded table. Attributes are quantized to `scale_digits` decimals and
/// doubled.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub dataset: PlainDataset,
    pub attr_names: Vec<String>,
    /// Original label value of each class index.
    pub label_values: Vec<i64>,
}

fn load_err(row: usize, col: usize, msg: impl Into<String>) -> CliError {
    CliError::Load {
        row,
        col,
        msg: msg.into(),
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a numeric table. `label_col` defaults to the last column; a first
/// row with non-numeric cells is taken as the header. Rows and columns in
/// errors are 1-based file positions.
pub fn load_csv(path: &Path, label_col: Option<usize>, scale_digits: u32, ring_k: u32) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    parse_csv(&text, label_col, scale_digits, ring_k)
}

pub fn parse_csv(text: &str, label_col: Option<usize>, scale_digits: u32, ring_k: u32) -> Result<Loaded, CliError> {
    if scale_digits > 18 {
        return Err(CliError::Usage("at most 18 decimal digits are supported".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<(usize, csv::StringRecord)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| load_err(i + 1, 0, e.to_string()))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        rows.push((i + 1, rec));
    }
    let mut header = None;
    if let Some((_, first)) = rows.first() {
        if first.iter().any(|c| parse_cell(c).is_none()) {
            header = Some(first.iter().map(str::to_string).collect::<Vec<_>>());
            rows.remove(0);
        }
    }
    if rows.is_empty() {
        return Err(load_err(1, 0, "no data rows"));
    }
    let width = header.as_ref().map_or(rows[0].1.len(), |h| h.len());
    if width < 2 {
        return Err(load_err(rows[0].0, 0, "need at least one attribute and a label column"));
    }
    let label_col = label_col.unwrap_or(width - 1);
    if label_col >= width {
        return Err(CliError::Usage(format!("label column {label_col} out of range for {width} columns")));
    }

    let factor = 10f64.powi(scale_digits as i32);
    let limit = 1i128 << (ring_k - 2);
    let m = width - 1;
    let mut attrs: Vec<Vec<i128>> = vec![Vec::with_capacity(rows.len()); m];
    let mut raw_labels = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        if rec.len() != width {
            return Err(load_err(*line, 0, format!("expected {width} cells, found {}", rec.len())));
        }
        let mut a = 0;
        for (c, cell) in rec.iter().enumerate() {
            let v = parse_cell(cell).ok_or_else(|| load_err(*line, c + 1, format!("not a number: {cell:?}")))?;
            if c == label_col {
                if v.fract() != 0.0 || v.abs() > i64::MAX as f64 {
                    return Err(load_err(*line, c + 1, format!("label is not an integer: {cell:?}")));
                }
                raw_labels.push(v as i64);
                continue;
            }
            let q = (v * factor).round();
            if q.abs() >= (limit / 2) as f64 {
                return Err(load_err(
                    *line,
                    c + 1,
                    format!("{cell} overflows a {ring_k}-bit ring at {scale_digits} decimal digits"),
                ));
            }
            attrs[a].push(2 * q as i128);
            a += 1;
        }
    }

    let label_values: Vec<i64> = raw_labels.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<i64, u64> = label_values.iter().enumerate().map(|(i, v)| (*v, i as u64)).collect();
    let labels = raw_labels.iter().map(|v| index[v]).collect();
    let attr_names = match header {
        Some(h) => h.into_iter().enumerate().filter(|(i, _)| *i != label_col).map(|(_, s)| s).collect(),
        None => (0..m).map(|i| format!("a{i}")).collect(),
    };
    let dataset = PlainDataset::new(attrs, labels, label_values.len(), 10u128.pow(scale_digits))?;
    Ok(Loaded {
        dataset,
        attr_names,
        label_values,
    })
}

/// Shuffled train and test indices with round(n * ratio) training samples.
pub fn train_test_split(n: usize, ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let cut = ((n as f64 * ratio).round() as usize).clamp(1, n);
    let test = idx.split_off(cut);
    (idx, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_table() {
        let l = parse_csv("x,y\n1,0\n2,0\n3,1\n4,1\n", None, 0, 32).unwrap();
        assert_eq!(l.dataset.n(), 4);
        assert_eq!(l.dataset.m(), 1);
        assert_eq!(l.dataset.num_labels, 2);
        assert_eq!(l.dataset.attrs[0], vec![2, 4, 6, 8]);
        assert_eq!(l.attr_names, vec!["x"]);
    }

    #[test]
    fn headerless_with_label_remap() {
        let l = parse_csv("0.25,7\n-1.5,3\n", None, 2, 32).unwrap();
        assert_eq!(l.dataset.attrs[0], vec![50, -300]);
        assert_eq!(l.dataset.labels, vec![1, 0]);
        assert_eq!(l.label_values, vec![3, 7]);
        assert_eq!(l.dataset.scale, 100);
    }

    #[test]
    fn label_column_can_be_first() {
        let l = parse_csv("1,5,6\n0,7,8\n", Some(0), 0, 32).unwrap();
        assert_eq!(l.dataset.m(), 2);
        assert_eq!(l.dataset.labels, vec![1, 0]);
        assert_eq!(l.dataset.attrs[1], vec![12, 16]);
    }

    #[test]
    fn diagnostics_name_the_cell() {
        let e = parse_csv("a,b\n1,0\n2,x\n", None, 0, 32).unwrap_err();
        assert!(matches!(e, CliError::Load { row: 3, col: 2, .. }), "{e}");
        let e = parse_csv("a,b\n1,0\n2\n", None, 0, 32).unwrap_err();
        assert!(matches!(e, CliError::Load { row: 3, .. }), "{e}");
        let e = parse_csv("a,b\n1,0.5\n", None, 0, 32).unwrap_err();
        assert!(matches!(e, CliError::Load { row: 2, col: 2, .. }), "{e}");
        let e = parse_csv("a,b\n", None, 0, 32).unwrap_err();
        assert!(matches!(e, CliError::Load { .. }), "{e}");
        let e = parse_csv("a,b\n300000,1\n", None, 4, 32).unwrap_err();
        assert!(e.to_string().contains("overflows"), "{e}");
    }

    #[test]
    fn split_is_seeded_and_complete() {
        let (a, b) = train_test_split(150, 2.0 / 3.0, 1);
        assert_eq!((a.len(), b.len()), (100, 50));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort();
        assert_eq!(all, (0..150).collect::<Vec<_>>());
        assert_eq!(train_test_split(150, 2.0 / 3.0, 1).0, a);
        assert_ne!(train_test_split(150, 2.0 / 3.0, 2).0, a);
    }
}
