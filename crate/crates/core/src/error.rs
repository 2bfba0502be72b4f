use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A value cannot be expressed in the requested representation
    /// (e.g. a negative integer over a basis without the sign element).
    #[error("not representable: {0}")]
    NotRepresentable(String),

    /// Input matrix was rank deficient where full column rank is required.
    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    /// Request exceeds a hard capacity guard (e.g. 2^n enumeration bounds).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Inputs lie outside the mathematical domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A local eigensolve failed to converge during a variational sweep.
    #[error("eigensolve failed to converge at tensor node {node}")]
    Eigensolve { node: usize },

    /// An internal consistency check failed; indicates a bug, not bad input.
    #[error("internal consistency failure: {0}")]
    Internal(String),

    /// A quantity exceeded the exact range of the machine representation.
    #[error("overflow: {0}")]
    Overflow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
