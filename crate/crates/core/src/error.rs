use thiserror::Error;

use crate::transport::PartyId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },

    #[error("ring mismatch: {0} bits vs {1} bits")]
    RingMismatch(u32, u32),

    #[error("malformed encoding: {0}")]
    Decode(String),

    #[error("transport failure with party {peer}: {reason}")]
    Transport { peer: PartyId, reason: String },

    #[error("message desync from party {peer}: expected seq {expected}, got {got}")]
    Desync { peer: PartyId, expected: u64, got: u64 },

    #[error("setup failure: {0}")]
    Setup(String),

    #[error("missing preprocessing: {0}")]
    Preprocessing(String),

    #[error("malformed model: {0}")]
    Model(String),

    #[error("share integrity violation: {0}")]
    Integrity(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }

    pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Length { expected, got })
        }
    }

    /// True for errors that merely report a peer going away.
    pub fn is_secondary(&self) -> bool {
        matches!(self, Error::Transport { .. })
    }
}
