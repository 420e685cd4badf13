use thiserror::Error;

pub type Result<T> = std::result::Result<T, RabiError>;

#[derive(Debug, Error)]
pub enum RabiError {
    /// Invalid parameters, truncation or numerical controls.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}x{expected}, found {found_rows}x{found_cols}")]
    DimensionMismatch {
        expected: usize,
        found_rows: usize,
        found_cols: usize,
    },

    /// A spectral sanity check failed (for instance a state without definite parity).
    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    #[error("not found: {0}")]
    NotFound(String),

    /// Emission too weak for g2(0) to carry meaning.
    #[error("undefined correlation: i_out = {i_out:e} is below the floor {floor:e}")]
    UndefinedCorrelation { i_out: f64, floor: f64 },

    #[error("integration error: {0}")]
    Integration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RabiError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        RabiError::Config(msg.into())
    }
}
