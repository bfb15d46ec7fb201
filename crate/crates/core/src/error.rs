use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {0} vs {1}")]
    QubitMismatch(usize, usize),

    #[error("unsupported qubit count {n} (allowed {min}..={max})")]
    QubitCount { n: usize, min: usize, max: usize },

    #[error("length {0} is not 4^n for a supported n")]
    BadLength(usize),

    #[error("label bits out of range for {n} qubits")]
    LabelRange { n: usize },

    #[error("invalid Pauli string {0:?}")]
    ParseLabel(String),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("Bell distribution not normalized (sum {0})")]
    Normalization(f64),

    #[error("estimator needs at least one sample")]
    EmptyCounts,

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
