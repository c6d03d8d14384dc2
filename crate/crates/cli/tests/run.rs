use std::io::Write;
use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;
use std::process::Command;

use rsstree_cli::{load_csv, run_train, CliError, RunConfig, RunMode};
use rsstree_core::TreeModel;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn toy_file() -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(f, "x,label\n1,0\n2,0\n3,1\n4,1\n").unwrap();
    f
}

fn toy_config(path: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::new(path);
    cfg.height = 1;
    cfg.scale_digits = 0;
    cfg.train_ratio = 1.0;
    cfg
}

#[test]
fn toy_inproc_run() {
    let f = toy_file();
    let report = run_train(&toy_config(f.path())).unwrap();
    assert!(report.rounds > 0);
    assert_eq!(report.train_accuracy, Some(1.0));
    assert_eq!(report.oracle_train_accuracy, Some(1.0));
    let model = report.model.as_ref().unwrap();
    assert_eq!(model.internal[0][0].threshold, 5);
    let text = report.to_text();
    assert!(text.contains("gen_perm_calls 1"));
    assert!(text.contains("split layer=0 nid=0 attr=0 threshold=5/2"));
    assert_eq!(TreeModel::from_text(&model.to_text()).unwrap(), *model);
}

#[test]
fn fixed_seed_reruns_are_identical() {
    let mut cfg = RunConfig::new(data("iris.csv"));
    cfg.height = 2;
    cfg.seed = 11;
    let a = run_train(&cfg).unwrap();
    let b = run_train(&cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.meters, b.meters);
}

#[test]
fn dataset_shapes() {
    let iris = load_csv(&data("iris.csv"), None, 4, 32).unwrap().dataset;
    assert_eq!((iris.n(), iris.m(), iris.num_labels), (150, 4, 3));
    let wine = load_csv(&data("wine.csv"), None, 4, 32).unwrap().dataset;
    assert_eq!((wine.n(), wine.m(), wine.num_labels), (178, 13, 3));
    let diag = load_csv(&data("diagnosis.csv"), None, 4, 32).unwrap().dataset;
    assert_eq!((diag.n(), diag.m(), diag.num_labels), (120, 6, 2));
    let ttt = load_csv(&data("tic_tac_toe.csv"), None, 4, 32).unwrap().dataset;
    assert_eq!((ttt.n(), ttt.m(), ttt.num_labels), (958, 9, 2));
}

#[test]
fn header_only_file_is_a_load_error() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "a,b,label").unwrap();
    let err = run_train(&RunConfig::new(f.path())).unwrap_err();
    assert!(matches!(err, CliError::Load { .. }));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn bad_rings_are_rejected() {
    let f = toy_file();
    let mut cfg = toy_config(f.path());
    cfg.ring_l = 32;
    assert!(matches!(run_train(&cfg), Err(CliError::Usage(_))));
}

fn free_addrs() -> [SocketAddr; 3] {
    let ls: Vec<TcpListener> = (0..3).map(|_| TcpListener::bind("127.0.0.1:0").unwrap()).collect();
    let addrs: Vec<SocketAddr> = ls.iter().map(|l| l.local_addr().unwrap()).collect();
    [addrs[0], addrs[1], addrs[2]]
}

#[test]
fn tcp_matches_inproc() {
    let f = toy_file();
    let base = toy_config(f.path());
    let inproc = run_train(&base).unwrap();
    let addrs = free_addrs();
    let reports: Vec<_> = std::thread::scope(|s| {
        let hs: Vec<_> = (0..3)
            .map(|party| {
                let mut cfg = base.clone();
                cfg.mode = RunMode::Tcp { party, addrs };
                if party != 0 {
                    cfg.dataset = PathBuf::from("/nonexistent");
                }
                s.spawn(move || run_train(&cfg).unwrap())
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (id, r) in reports.iter().enumerate() {
        assert_eq!(r.model, inproc.model);
        assert_eq!(r.meters[0], inproc.meters[id]);
    }
    assert_eq!(reports[0].train_accuracy, Some(1.0));
    assert_eq!(reports[1].train_accuracy, None);
}

#[test]
fn binary_reports_and_exit_codes() {
    let f = toy_file();
    let out = Command::new(env!("CARGO_BIN_EXE_rsstree"))
        .args(["train", "--height", "1", "--scale-digits", "0", "--train-ratio", "1", "--dataset"])
        .arg(f.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("accuracy secure_train=1.0000"));

    let out = Command::new(env!("CARGO_BIN_EXE_rsstree"))
        .args(["train", "--dataset", "/nonexistent.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    write!(bad, "a,label\n1,0\nx,1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rsstree"))
        .args(["train", "--dataset"])
        .arg(bad.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3, column 1"));
}

#[test]
fn bench_subcommand_emits_a_table() {
    let out = Command::new(env!("CARGO_BIN_EXE_rsstree"))
        .args(["bench", "--heights", "1,2", "--sizes", "16", "--attrs", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("height n attrs rounds"));
}
