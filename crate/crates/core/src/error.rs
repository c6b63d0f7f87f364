use thiserror::Error;

/// Errors produced by the estimation, geometry and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("n = {n} exceeds the exact-computation limit n_max = {n_max}; use a simulated reference instead")]
    ExactLimit { n: usize, n_max: usize },

    #[error("lambdas must be pairwise distinct")]
    DegenerateLambdas,

    #[error("(alpha, beta) = (0, 0) is the Anderson-Darling weight; use anderson_darling instead")]
    UseAndersonDarling,

    #[error("untrimmed Anderson-Darling is undefined when a transformed PIT equals 0 or 1; use eps > 0")]
    AdNeedsTrimming,

    #[error("moment order {order} is not available in the reference (max {available})")]
    MomentOrder { order: usize, available: usize },

    #[error("degenerate moment conditions: the weighting matrix is zero")]
    DegenerateMoments,

    #[error("reference is for n = {reference}, sample has n = {sample}")]
    ReferenceMismatch { reference: usize, sample: usize },

    #[error("unknown method '{0}'")]
    UnknownMethod(String),

    #[error("unknown kernel '{0}'")]
    UnknownKernel(String),

    #[error("kernel '{0}' is of order higher than two and can take negative values")]
    HigherOrderKernel(String),

    #[error("criterion is non-finite at {bad} of {total} grid points")]
    NonFiniteCriterion { bad: usize, total: usize },

    #[error("numerical integration did not converge: estimated error {achieved:e} > tolerance {requested:e}")]
    Integration { achieved: f64, requested: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("root not bracketed: {0}")]
    NoRoot(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateMoments
                | Error::NonFiniteCriterion { .. }
                | Error::Integration { .. }
                | Error::NoRoot(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
