use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("training diverged at step {step}: {detail}")]
    Training { step: usize, detail: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {kind}")]
    Format { path: PathBuf, kind: FormatError },

    #[error("qoi evaluation failed: {0}")]
    Qoi(String),

    #[error("config error: {0}")]
    Config(String),
}

/// Structured failures when decoding a container file.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("truncated payload: needed {needed} bytes, found {found}")]
    Truncated { needed: u64, found: u64 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("invalid manifest: {0}")]
    Manifest(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Contract(_) => "contract",
            Error::Geometry(_) => "geometry",
            Error::Numerical(_) => "numerical",
            Error::Training { .. } => "training",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Qoi(_) => "qoi",
            Error::Config(_) => "config",
        }
    }
}
