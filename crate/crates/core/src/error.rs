use thiserror::Error;

/// Errors raised by the laboratory. Every variant names the violated constraint.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Hurst index must satisfy 0 < H < 1, got {0}")]
    InvalidHurst(f64),

    #[error("operation requires H > 1/2, got H = {0}")]
    ShortMemory(f64),

    #[error("Hermite order must satisfy 2 <= q <= 16, got {0}")]
    InvalidOrder(u32),

    #[error("degenerate interval [{0}, {1}]")]
    DegenerateInterval(f64, f64),

    #[error("{divisor} does not divide {n}")]
    NotDivisible { n: usize, divisor: usize },

    #[error("resolution must be at least {min}, got {n}")]
    ResolutionTooSmall { n: usize, min: usize },

    #[error("covariance factorization failed at n = {n}: {reason}")]
    Factorization { n: usize, reason: String },

    #[error("regime mismatch: operation requires {expected}, got {actual} (q = {q}, H = {h})")]
    RegimeMismatch {
        expected: &'static str,
        actual: &'static str,
        q: u32,
        h: f64,
    },

    #[error("series sum of rho^q is not summable for q = {q}, H = {h} (needs H < 1 - 1/(2q))")]
    NonSummable { q: u32, h: f64 },

    #[error("Hurst mismatch: expected {expected}, path has {found}")]
    HurstMismatch { expected: f64, found: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("sample contains a non-finite value at index {0}")]
    NonFinite(usize),

    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("rate fit needs positive ordinates, got y = {0}")]
    NonPositive(f64),

    #[error("need at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },

    #[error("batch must be at least {min}, got {got}")]
    BatchTooSmall { min: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Numerical failures, as opposed to misuse of the API.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Factorization { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
