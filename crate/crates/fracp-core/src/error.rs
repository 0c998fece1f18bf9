use thiserror::Error;

/// Crate-wide error type.
///
/// `Precondition` is reserved for violated mathematical preconditions of
/// report operations (the CLI maps it to its own exit code); everything else
/// is a construction or numerical failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("kernel evaluated at coincident points")]
    CoincidentPoints,
    #[error("operands live on different lattices")]
    LatticeMismatch,
    #[error("far field is not integrable here: {0}")]
    NonIntegrableFarField(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("solver setup failed: {0}")]
    Solver(String),
    #[error("consistency cross-check failed: {0}")]
    CrossCheck(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
