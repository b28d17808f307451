use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator, learning kernel or harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("channel index {index} out of range (M = {channels})")]
    ChannelOutOfRange { index: usize, channels: usize },

    #[error("no SINR for channel {0}: user signal power is zero")]
    NoSignal(usize),

    #[error("expected {expected} slot maps per hop, got {got}")]
    SlotCount { expected: usize, got: usize },

    #[error("shape mismatch in {layer}: expected {expected:?}, got {got:?}")]
    Shape {
        layer: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("backward called without a forward cache ({0})")]
    MissingCache(String),

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("metrics format error: {0}")]
    Metrics(String),

    #[error("runs are not comparable: {0}")]
    Incomparable(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("metrics file: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
