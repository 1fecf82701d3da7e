use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid subcarrier layout: {0}")]
    InvalidLayout(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("need {needed} valid subcarriers on each side of the DC gap, found {found}")]
    InsufficientContext { needed: usize, found: usize },

    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("expected {expected} receive chains, found {found}")]
    ChainCount { expected: usize, found: usize },

    #[error("chain index {index} out of range for {chains} chains")]
    ChainIndex { index: usize, chains: usize },

    #[error("capture has too few frames ({found}, need at least {needed})")]
    EmptyCapture { needed: usize, found: usize },

    #[error("time-averaged power is zero at subcarrier index {index}")]
    ZeroPower { index: i32 },

    #[error("received signal strength missing on chain {chain}")]
    MissingRss { chain: usize },

    #[error("no tap exceeds the first-signal threshold")]
    NoSignal,

    #[error("moving-average window {window} must be odd and at most the series length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("input sequence is empty")]
    EmptyInput,

    #[error("exclusion windows cover the whole delay axis")]
    FullyExcluded,

    #[error("bad capture magic")]
    BadMagic,

    #[error("unsupported capture format version {0}")]
    VersionUnsupported(u32),

    #[error("corrupt record {index}: {reason}")]
    CorruptRecord { index: usize, reason: String },

    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_frame(self, index: usize) -> Error {
        match self {
            Error::Frame { .. } => self,
            other => Error::Frame {
                index,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, with frame context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Frame { source, .. } => source.root(),
            other => other,
        }
    }
}
