use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Defects in a serialized weights file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic bytes, expected \"SRCW\"")]
    BadMagic,
    #[error("unsupported weights version {0}")]
    BadVersion(u8),
    #[error("file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("layer {layer}: expected dims {expected:?} (kh, kw, in, out), found {found:?}")]
    DimMismatch {
        layer: usize,
        expected: [usize; 4],
        found: [usize; 4],
    },
    #[error("layer {layer}: invalid dims {found:?} (kh, kw, in, out)")]
    InvalidDims { layer: usize, found: [usize; 4] },
    #[error("non-finite parameter in layer {0}")]
    NonFinite(usize),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },

    #[error("{}: invalid JSON: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("weights format: {0}")]
    Format(#[from] FormatError),

    #[error("training diverged at step {step} (loss = {loss})")]
    Diverged { step: usize, loss: f64 },

    #[error("degenerate selection: floor({r} * {n}) = 0 samples")]
    DegenerateSelection { n: usize, r: f64 },

    #[error("degenerate score distribution: total score is zero")]
    DegenerateDistribution,

    #[error("no usable images in {}", .0.display())]
    EmptyCorpus(PathBuf),

    #[error("fingerprint mismatch: expected {expected}, found {found}")]
    StaleManifest { expected: String, found: String },

    #[error("dataset integrity: {0}")]
    Integrity(String),

    #[error("unknown arm label {0:?}")]
    UnknownLabel(String),

    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
