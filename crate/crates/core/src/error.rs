use thiserror::Error;

/// Errors raised by the solvers, generators and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("data length {got} does not match a {rows}x{cols} matrix")]
    DataLength {
        rows: usize,
        cols: usize,
        got: usize,
    },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("SVD of a {rows}x{cols} matrix did not converge within {max_iter} iterations")]
    SvdNoConvergence {
        rows: usize,
        cols: usize,
        max_iter: usize,
    },

    #[error("singular value at index {index} is zero")]
    ZeroSingularValue { index: usize },

    #[error("truncation level {k} exceeds the numerical rank {rank} (cutoff sigma = {cutoff:e})")]
    RankExceeded { k: usize, rank: usize, cutoff: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid randomized SVD configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "N(A) and N(L) intersect nontrivially (sigma_min(AW) = {sigma_min:e} <= {tol:e}); \
         the penalized minimizer is not unique"
    )]
    NonUniqueMinimizer { sigma_min: f64, tol: f64 },

    #[error("penalty has a kernel of dimension {dim}; this path requires N(L) = {{0}}")]
    PenaltyKernel { dim: usize },

    #[error(
        "iterative refinement diverged at iteration {iteration}: \
         the update norm grew by more than 10x three times in a row (last {last:e})"
    )]
    Divergence { iteration: usize, last: f64 },

    #[error("unknown problem '{name}'; valid names: {valid}")]
    UnknownProblem { name: String, valid: String },

    #[error("missing ingredient for {check}: {what}")]
    MissingIngredient { check: &'static str, what: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Matrix Market parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// Short machine-readable tag, used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } | Error::DataLength { .. } => "shape",
            Error::NonFinite { .. } => "non_finite",
            Error::SvdNoConvergence { .. } => "svd_no_convergence",
            Error::ZeroSingularValue { .. } => "zero_singular_value",
            Error::RankExceeded { .. } => "rank_exceeded",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::InvalidConfig(_) => "invalid_config",
            Error::NonUniqueMinimizer { .. } => "non_unique_minimizer",
            Error::PenaltyKernel { .. } => "penalty_kernel",
            Error::Divergence { .. } => "divergence",
            Error::UnknownProblem { .. } => "unknown_problem",
            Error::MissingIngredient { .. } => "missing_ingredient",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
