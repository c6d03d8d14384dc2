//! Training runs and their reports.

use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rsstree_core::model::open_model;
use rsstree_core::oracle::{plain_train, GiniMode};
use rsstree_core::session::{run_tcp_party, Mode};
use rsstree_core::train::{train_decision_tree, SecureDataset, TrainConfig};
use rsstree_core::transport::PartyId;
use rsstree_core::{run_session, CommMeter, Party, Phase, PlainDataset, RingConfig, SessionConfig, TreeModel};
use sha2::{Digest, Sha256};

use crate::data::{load_csv, train_test_split};
use crate::CliError;

/// Data owner in every run.
pub const OWNER: PartyId = 0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunMode {
    Inproc,
    Tcp {
        party: PartyId,
        addrs: [SocketAddr; 3],
    },
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub label_col: Option<usize>,
    pub height: u32,
    pub ring_k: u32,
    pub ring_l: u32,
    pub frac_bits: Option<u32>,
    pub scale_digits: u32,
    pub seed: u64,
    pub mode: RunMode,
    /// Party that receives the model; every party when `None`.
    pub open_to: Option<PartyId>,
    /// Fraction of samples used for training.
    pub train_ratio: f64,
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        RunConfig {
            dataset: dataset.into(),
            label_col: None,
            height: 6,
            ring_k: 32,
            ring_l: 128,
            frac_bits: None,
            scale_digits: 4,
            seed: 0,
            mode: RunMode::Inproc,
            open_to: None,
            train_ratio: 2.0 / 3.0,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.ring_k >= self.ring_l {
            return Err(CliError::Usage(format!("ring-k {} must be below ring-l {}", self.ring_k, self.ring_l)));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio <= 1.0) {
            return Err(CliError::Usage("train ratio must lie in (0, 1]".into()));
        }
        if matches!(self.open_to, Some(p) if p > 2) {
            return Err(CliError::Usage("open-to must be a party id 0..2".into()));
        }
        if let RunMode::Tcp { party, .. } = self.mode {
            if party > 2 {
                return Err(CliError::Usage("party-id must be 0..2".into()));
            }
        }
        Ok(())
    }

    /// Digest of the public parameters every party must agree on.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        let pubs = format!(
            "h={} k={} l={} f={:?} digits={} open={:?}",
            self.height, self.ring_k, self.ring_l, self.frac_bits, self.scale_digits, self.open_to
        );
        h.update(pubs.as_bytes());
        h.finalize().into()
    }
}

/// Outcome of one run as seen by this process.
#[derive(Clone, Debug)]
pub struct Report {
    pub dataset: String,
    pub n_train: usize,
    pub n_test: usize,
    pub m: usize,
    pub v: usize,
    pub height: u32,
    pub ring_k: u32,
    pub ring_l: u32,
    pub frac_bits: u32,
    pub model: Option<TreeModel>,
    /// Meters of the parties run in this process.
    pub meters: Vec<(PartyId, CommMeter)>,
    pub rounds: u64,
    pub wall: Duration,
    pub gen_perm_calls: usize,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub oracle_train_accuracy: Option<f64>,
    pub oracle_test_accuracy: Option<f64>,
}

struct PartyResult {
    model: Option<TreeModel>,
    frac_bits: u32,
    gen_perm_calls: usize,
    dims: (usize, usize, usize),
}

fn party_program(p: &mut Party, data: Option<&PlainDataset>, cfg: &RunConfig) -> rsstree_core::Result<PartyResult> {
    let small = RingConfig::integer(cfg.ring_k)?;
    let sds = SecureDataset::input(p, OWNER, data.filter(|_| p.id() == OWNER), small)?;
    let tc = TrainConfig::new(cfg.height, cfg.ring_k, cfg.ring_l, cfg.frac_bits, sds.n)?
        .with_scale(10u128.pow(cfg.scale_digits));
    let out = train_decision_tree(p, &sds, &tc)?;
    let model = p.in_phase(Phase::Online, |p| open_model(p, &out.tree, cfg.open_to))?;
    Ok(PartyResult {
        model,
        frac_bits: tc.frac_bits,
        gen_perm_calls: out.gen_perm_calls,
        dims: (sds.n, sds.m, sds.v),
    })
}

fn accuracy(ds: &PlainDataset, model: &TreeModel) -> Result<Option<f64>, CliError> {
    if ds.n() == 0 {
        return Ok(None);
    }
    Ok(Some(ds.accuracy(model)?))
}

/// Loads, splits, trains and evaluates. Party 0 owns the data; in tcp mode
/// the other processes never read the dataset.
pub fn run_train(cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let is_owner = match cfg.mode {
        RunMode::Inproc => true,
        RunMode::Tcp { party, .. } => party == OWNER,
    };
    let split = if is_owner {
        let loaded = load_csv(&cfg.dataset, cfg.label_col, cfg.scale_digits, cfg.ring_k)?;
        let ds = loaded.dataset;
        let (tr, te) = train_test_split(ds.n(), cfg.train_ratio, cfg.seed);
        Some((ds.subset(&tr), ds.subset(&te)))
    } else {
        None
    };
    let train = split.as_ref().map(|s| &s.0);

    let start = Instant::now();
    let (result, meters, rounds) = match &cfg.mode {
        RunMode::Inproc => {
            let out = run_session(&SessionConfig::inproc(cfg.seed), |p| party_program(p, train, cfg))?;
            let rounds = out.meter.total_rounds();
            let mut outs = out.outputs.into_iter();
            let mut r = outs.next().unwrap();
            if r.model.is_none() {
                r.model = outs.find_map(|x| x.model);
            }
            let meters = out.meter.parties.iter().cloned().enumerate().collect();
            (r, meters, rounds)
        }
        RunMode::Tcp { party, addrs } => {
            let sc = SessionConfig {
                mode: Mode::Tcp { addrs: *addrs },
                seed: Some(cfg.seed),
                timeout: Duration::from_secs(600),
                digest: cfg.digest(),
            };
            let (r, meter) = run_tcp_party(&sc, *party, |p| party_program(p, train, cfg))?;
            let rounds = meter.total().rounds;
            (r, vec![(*party, meter)], rounds)
        }
    };
    let wall = start.elapsed();

    let (n, m, v) = result.dims;
    let mut report = Report {
        dataset: cfg.dataset.display().to_string(),
        n_train: n,
        n_test: split.as_ref().map_or(0, |s| s.1.n()),
        m,
        v,
        height: cfg.height,
        ring_k: cfg.ring_k,
        ring_l: cfg.ring_l,
        frac_bits: result.frac_bits,
        model: result.model,
        meters,
        rounds,
        wall,
        gen_perm_calls: result.gen_perm_calls,
        train_accuracy: None,
        test_accuracy: None,
        oracle_train_accuracy: None,
        oracle_test_accuracy: None,
    };
    if let Some((tr, te)) = &split {
        let oracle = plain_train(tr, cfg.height, GiniMode::Exact);
        report.oracle_train_accuracy = accuracy(tr, &oracle)?;
        report.oracle_test_accuracy = accuracy(te, &oracle)?;
        if let Some(model) = &report.model {
            report.train_accuracy = accuracy(tr, model)?;
            report.test_accuracy = accuracy(te, model)?;
        }
    }
    Ok(report)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

impl Report {
    /// `key value` lines, then a per-party traffic table, then the model.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset {}", self.dataset);
        let _ = writeln!(s, "samples train={} test={}", self.n_train, self.n_test);
        let _ = writeln!(s, "shape attrs={} labels={} height={}", self.m, self.v, self.height);
        let _ = writeln!(s, "rings k={} l={} frac={}", self.ring_k, self.ring_l, self.frac_bits);
        let _ = writeln!(s, "wall_seconds {:.3}", self.wall.as_secs_f64());
        let _ = writeln!(s, "rounds {}", self.rounds);
        let _ = writeln!(s, "gen_perm_calls {}", self.gen_perm_calls);
        let _ = writeln!(
            s,
            "accuracy secure_train={} secure_test={} oracle_train={} oracle_test={}",
            opt(self.train_accuracy),
            opt(self.test_accuracy),
            opt(self.oracle_train_accuracy),
            opt(self.oracle_test_accuracy)
        );
        let _ = writeln!(s, "party phase rounds bits bytes");
        for (id, m) in &self.meters {
            for ph in Phase::ALL {
                let st = m.phase(ph);
                let _ = writeln!(s, "{id} {ph:?} {} {} {}", st.rounds, st.bits(), st.bytes());
            }
        }
        if let Some(model) = &self.model {
            s.push_str(&model.to_text());
        }
        s
    }
}
