//! Dataset loading, run orchestration and reporting for the `rsstree` tool.

pub mod bench;
pub mod data;
pub mod run;

pub use data::{load_csv, parse_csv, train_test_split, Loaded};
pub use run::{run_train, Report, RunConfig, RunMode};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("load error at row {row}, column {col}: {msg}")]
    Load { row: usize, col: usize, msg: String },

    #[error(transparent)]
    Core(#[from] rsstree_core::Error),
}

impl CliError {
    /// Process exit code by failure category.
    pub fn exit_code(&self) -> i32 {
        use rsstree_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Load { .. } => 3,
            CliError::Core(e) => match e {
                E::Config(_) | E::Range(_) => 2,
                E::Transport { .. } | E::Desync { .. } | E::Io(_) | E::Setup(_) => 4,
                E::Integrity(_) => 5,
                _ => 1,
            },
        }
    }

    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "load",
            4 => "network",
            5 => "integrity",
            _ => "protocol",
        }
    }
}
