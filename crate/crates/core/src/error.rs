use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("not Hermitian (asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("bad factorization: {total} is not {left} x {right}")]
    BadFactorization { total: usize, left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate spectrum: alpha = 0 (state is pure or maximally entangled)")]
    DegenerateSpectrum,

    #[error("class count {count} exceeds cap {cap}")]
    CapExceeded { count: f64, cap: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("partial inner product vanishes; no product extension exists")]
    ZeroOverlap,

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("unsupported protocol: {0}")]
    UnsupportedProtocol(String),

    #[error("Kraus family is incomplete (deviation {0:e})")]
    IncompleteKraus(f64),

    #[error("outcome is not epsilon-good: error {error} exceeds {threshold}")]
    NotEpsilonGood { error: f64, threshold: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
