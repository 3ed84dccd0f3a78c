use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid qubit register: {0}")]
    InvalidRegister(String),

    #[error("copy index {index} out of range for {copies} copies")]
    InvalidCopyIndex { index: usize, copies: usize },

    #[error("{qubits} qubits exceeds the dense limit of {limit}")]
    TooLarge { qubits: usize, limit: usize },

    #[error("operator is zero")]
    ZeroOperator,

    #[error("spectrum is empty")]
    EmptySpectrum,

    #[error("state does not commute with the charge (residual {residual:.3e})")]
    SymmetryViolation { residual: f64 },

    #[error("supercharge eigenvalue {0} is not an integer")]
    NonIntegerCharge(f64),

    #[error("charge sector {0} is not populated")]
    EmptySector(i64),

    #[error("basis matrix is not unitary (deviation {0:.3e})")]
    NonUnitary(f64),

    #[error("malformed record: {0}")]
    MalformedRecord(String),

    #[error("need at least {needed} batches, have {available}")]
    TooFewBatches { needed: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("correlation spectrum leaves [0, 1]: eigenvalue {0}")]
    SpectrumOutOfRange(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
