use std::path::PathBuf;

/// Errors produced anywhere in the core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("parameter {0} was not recorded on the tape")]
    ParamNotOnTape(usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown attack name {0:?} (not in taxonomy)")]
    UnknownAttack(String),

    #[error("value {value:?} of column {column} is not in the fitted vocabulary")]
    UnknownCategory { column: &'static str, value: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite loss at epoch {epoch}, batch {batch} (recon={recon}, regu={regu})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        recon: f64,
        regu: f64,
    },

    #[error("schema fingerprint mismatch: checkpoint has {expected}, dataset has {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    IoStream(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
