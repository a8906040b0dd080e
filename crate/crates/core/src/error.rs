use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PstError {
    /// Invalid user-supplied specification (basis, model, problem or file).
    #[error("specification error: {0}")]
    Spec(String),

    /// A state or index is not part of the enumerated basis.
    #[error("lookup error: {0}")]
    Lookup(String),

    /// Operation is not defined for the given input (e.g. partition with N != 2).
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed permutation: {0}")]
    MalformedPermutation(String),

    /// Spectral plan does not cover the target or carries a non-unitary mixing matrix.
    #[error("plan error: {0}")]
    Plan(String),

    /// Operators or states of incompatible dimension.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("state is not normalized (norm = {0})")]
    Normalization(f64),

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
}

pub type Result<T> = std::result::Result<T, PstError>;
