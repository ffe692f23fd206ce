use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate polytope: {0}")]
    DegeneratePolytope(String),

    #[error("empty polytope: {0}")]
    EmptyPolytope(String),

    #[error("unbounded polytope: {0}")]
    UnboundedPolytope(String),

    /// Rows (0-indexed) that are linearly dependent on earlier rows.
    #[error("rank-deficient constraint matrix; dependent rows {rows:?}")]
    RankDeficient { rows: Vec<usize> },

    #[error("point is not strictly interior: slack {slack:e} at constraint {index}")]
    BoundaryViolation { index: usize, slack: f64 },

    #[error("factorization failed near the boundary: {0}")]
    NearBoundary(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::DimensionMismatch { .. }
        )
    }
}
