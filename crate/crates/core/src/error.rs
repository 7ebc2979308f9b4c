use thiserror::Error;

/// Errors surfaced by the encoding, fault-handling and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("row index {index} out of range for {n} rows")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("input matrix is not symmetric: relative asymmetry {rel:.3e} exceeds {tol:.3e}")]
    AsymmetricInput { rel: f64, tol: f64 },

    #[error("fault capacity was exceeded: {requested} total erasures against capacity {capacity}")]
    CapacityExceeded { requested: usize, capacity: usize },

    #[error("row {0} is already faulty")]
    DuplicateFault(usize),

    #[error("encoding submatrix for the faulty rows is singular; this fault pattern is not recoverable")]
    SingularEncodingSubmatrix,

    #[error("no faults are active; reconstitution is undefined")]
    NoFaults,

    #[error("fault state is inconsistent: {0}")]
    InconsistentFaultState(String),

    #[error("block is rank deficient and could not be repaired")]
    RankDeficientBlock,

    #[error("conjugate gradient breakdown: operator is not positive definite (a diagonal shift may help)")]
    CgBreakdown,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
