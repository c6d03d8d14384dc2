use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rsstree_cli::bench::{sweep, table};
use rsstree_cli::{run_train, CliError, RunConfig, RunMode};

#[derive(Parser)]
#[command(name = "rsstree", version, about = "Three-party secret-shared decision tree training")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Inproc,
    Tcp,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tree on a CSV file and report accuracy and traffic.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Zero-based label column; defaults to the last column.
        #[arg(long)]
        label_col: Option<usize>,
        #[arg(long, default_value_t = 6)]
        height: u32,
        #[arg(long, default_value_t = 32)]
        ring_k: u32,
        #[arg(long, default_value_t = 128)]
        ring_l: u32,
        /// Fractional bits of the Gini quotients; defaults to 2 ceil(log2 n).
        #[arg(long)]
        frac_bits: Option<u32>,
        #[arg(long, default_value_t = 4)]
        scale_digits: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Inproc)]
        mode: ModeArg,
        /// This process's party in tcp mode.
        #[arg(long)]
        party_id: Option<usize>,
        /// Three comma-separated host:port addresses for tcp mode.
        #[arg(long, value_delimiter = ',')]
        addresses: Vec<SocketAddr>,
        /// Party that receives the model, or "all".
        #[arg(long, default_value = "all")]
        open_to: String,
        #[arg(long, default_value_t = 2.0 / 3.0)]
        train_ratio: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report_path: Option<PathBuf>,
    },
    /// Sweep heights and sample counts on synthetic data.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        heights: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "256")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        attrs: usize,
        #[arg(long, default_value_t = 2)]
        labels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report_path: Option<PathBuf>,
    },
}

fn emit(text: &str, path: Option<PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(&p, text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Command::Train {
            dataset,
            label_col,
            height,
            ring_k,
            ring_l,
            frac_bits,
            scale_digits,
            seed,
            mode,
            party_id,
            addresses,
            open_to,
            train_ratio,
            report_path,
        } => {
            let mode = match mode {
                ModeArg::Inproc => RunMode::Inproc,
                ModeArg::Tcp => {
                    let party = party_id.ok_or_else(|| CliError::Usage("tcp mode needs --party-id".into()))?;
                    let addrs: [SocketAddr; 3] = addresses
                        .try_into()
                        .map_err(|_| CliError::Usage("tcp mode needs exactly three --addresses".into()))?;
                    RunMode::Tcp { party, addrs }
                }
            };
            let open_to = match open_to.as_str() {
                "all" => None,
                s => Some(s.parse().map_err(|_| CliError::Usage(format!("bad --open-to {s:?}")))?),
            };
            let cfg = RunConfig {
                dataset,
                label_col,
                height,
                ring_k,
                ring_l,
                frac_bits,
                scale_digits,
                seed,
                mode,
                open_to,
                train_ratio,
            };
            let report = run_train(&cfg)?;
            emit(&report.to_text(), report_path)
        }
        Command::Bench {
            heights,
            sizes,
            attrs,
            labels,
            seed,
            report_path,
        } => {
            let rows = sweep(&heights, &sizes, attrs, labels, seed)?;
            emit(&table(&rows), report_path)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
