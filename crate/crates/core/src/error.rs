use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("expected {expected} qubits, found {found}")]
    QubitMismatch { expected: usize, found: usize },

    #[error("{n_qubits} qubits exceeds the dense limit of {limit}")]
    DenseLimit { n_qubits: usize, limit: usize },

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("states are not orthogonal (|<a|b>| = {0:e})")]
    NotOrthogonal(f64),

    #[error("propagator was built from a different Hamiltonian")]
    FingerprintMismatch,

    #[error("symmetry sector violation: {0}")]
    SymmetrySector(String),

    #[error("arccos argument {0} lies outside [-1, 1] beyond the clamp tolerance")]
    ExcessiveShotNoise(f64),

    #[error("pencil is not square: {0}")]
    NonSquare(String),

    #[error("generalized eigenproblem retained no directions")]
    ZeroRank,

    #[error("no eigenvalues to select from")]
    EmptySpectrum,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear algebra failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
