//! Round and traffic sweeps over synthetic data.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rsstree_core::train::{train_decision_tree, SecureDataset, TrainConfig};
use rsstree_core::{run_session, Phase, PlainDataset, SessionConfig};

use crate::CliError;

/// Uniform attributes in [0, 1000) with labels from a threshold rule on
/// the first attribute plus noise.
pub fn synthetic(n: usize, m: usize, v: usize, seed: u64) -> PlainDataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let attrs: Vec<Vec<i128>> = (0..m)
        .map(|_| (0..n).map(|_| 2 * rng.gen_range(0..1000)).collect())
        .collect();
    let labels = (0..n)
        .map(|j| {
            if rng.gen_bool(0.1) {
                rng.gen_range(0..v as u64)
            } else {
                (attrs[0][j] as u64 * v as u64) / 2000
            }
        })
        .collect();
    PlainDataset::new(attrs, labels, v, 1).expect("valid synthetic data")
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub height: u32,
    pub n: usize,
    pub m: usize,
    pub rounds: u64,
    pub online_rounds: u64,
    pub bits: u64,
    pub gen_perm_calls: usize,
    pub seconds: f64,
}

/// Trains on the synthetic set once per (height, n) pair. Rounds and bits
/// cover training only; input sharing is excluded.
pub fn sweep(heights: &[u32], ns: &[usize], m: usize, v: usize, seed: u64) -> Result<Vec<BenchRow>, CliError> {
    let mut rows = Vec::new();
    for &n in ns {
        let ds = synthetic(n, m, v, seed);
        for &h in heights {
            let tc = TrainConfig::new(h, 32, 128, None, n)?;
            let start = Instant::now();
            let out = run_session(&SessionConfig::inproc(seed), |p| {
                let sds = SecureDataset::input(p, 0, (p.id() == 0).then_some(&ds), tc.small)?;
                let before = p.meter().clone();
                let t = train_decision_tree(p, &sds, &tc)?;
                Ok((p.meter().since(&before), t.gen_perm_calls))
            })?;
            let seconds = start.elapsed().as_secs_f64();
            let meters: Vec<_> = out.outputs.iter().map(|o| o.0.clone()).collect();
            rows.push(BenchRow {
                height: h,
                n,
                m,
                rounds: meters.iter().map(|m| m.total().rounds).max().unwrap_or(0),
                online_rounds: meters.iter().map(|m| m.phase(Phase::Online).rounds).max().unwrap_or(0),
                bits: meters.iter().map(|m| m.total().bits()).sum(),
                gen_perm_calls: out.outputs[0].1,
                seconds,
            });
        }
    }
    Ok(rows)
}

pub fn table(rows: &[BenchRow]) -> String {
    let mut s = String::from("height n attrs rounds online_rounds bits gen_perm_calls seconds\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {:.3}",
            r.height, r.n, r.m, r.rounds, r.online_rounds, r.bits, r.gen_perm_calls, r.seconds
        );
    }
    s
}

/// Least-squares line y = a + b x and the largest relative residual.
pub fn affine_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let a = my - b * mx;
    let worst = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| ((a + b * x) - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max);
    (a, b, worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_zero_residual() {
        let (a, b, r) = affine_fit(&[1.0, 2.0, 3.0], &[5.0, 7.0, 9.0]);
        assert!((a - 3.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12 && r < 1e-12);
    }

    #[test]
    fn synthetic_is_seeded() {
        assert_eq!(synthetic(20, 2, 3, 1), synthetic(20, 2, 3, 1));
        assert!(synthetic(50, 2, 3, 1).labels.iter().all(|l| *l < 3));
    }

    #[test]
    fn small_sweep_runs() {
        let rows = sweep(&[1, 2], &[16], 2, 2, 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].rounds > rows[0].rounds);
        assert!(rows.iter().all(|r| r.gen_perm_calls == 2));
    }
}
