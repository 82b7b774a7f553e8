use thiserror::Error;

pub type Result<T, E = LoheError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LoheError {
    #[error("invalid shape {dims:?}: {reason}")]
    InvalidShape { dims: Vec<usize>, reason: String },

    #[error("index {coords:?} out of bounds for shape {dims:?}")]
    IndexOutOfBounds { coords: Vec<usize>, dims: Vec<usize> },

    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("rank mismatch: expected rank {expected}, got {found}")]
    RankMismatch { expected: usize, found: usize },

    #[error("matrix dimension mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    MatrixDims {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("norm drift {drift:.3e} exceeds tolerance {tolerance:.3e} at t = {time}")]
    NormDrift {
        time: f64,
        drift: f64,
        tolerance: f64,
    },

    #[error(
        "consistency residual needs {entries} entries (D = {dim}); cap is D <= {cap}, use smaller dimensions"
    )]
    ResidualTooLarge { dim: usize, entries: u128, cap: usize },

    #[error("window too short: need at least {needed} records, got {got}")]
    WindowTooShort { needed: usize, got: usize },

    #[error("invalid coupling key `{0}`: expected a string of '0'/'1' of length equal to the rank")]
    CouplingKey(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl LoheError {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        LoheError::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        LoheError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
