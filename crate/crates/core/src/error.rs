use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite component at index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is singular or not positive definite")]
    SingularMatrix,

    #[error("backtracking exceeded {shrinks} shrinks at iteration {k} (last t = {t:e})")]
    BacktrackingFailed { k: usize, shrinks: usize, t: f64 },

    /// A theorem's hypothesis is violated by the supplied schedule or trace.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("function is +infinity on every grid point")]
    EmptyGridDomain,

    #[error("supremum reaches the search cap T_max = {t_max:e}; increase T_max")]
    SteepBoundCap { t_max: f64 },

    #[error("conjugate oracle unavailable for {0}")]
    ConjugateUnavailable(String),

    #[error("trace is missing {0}")]
    MissingRecord(String),

    #[error("self-check failed: {0}")]
    CheckFailed(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
