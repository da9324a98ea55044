//! Crate-wide error type and process exit-code mapping.

use thiserror::Error;

/// Every fallible operation in the crate returns this error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix entries must be finite: {0}")]
    NonFiniteEntries(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("covariance is numerically singular (smallest eigenvalue {min:.3e} < 1e-12 x largest {max:.3e})")]
    SingularCovariance { min: f64, max: f64 },

    #[error("index list is not a bijection on 0..{dim}: {reason}")]
    NotABijection { dim: usize, reason: String },

    #[error("orthogonality check failed: max |Q^T Q - I| = {defect:.3e} exceeds {tol:.1e}")]
    NotOrthogonal { defect: f64, tol: f64 },

    #[error("Lambda matrix is numerically singular")]
    SingularLambda,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sample is degenerate: {0}")]
    DegenerateSample(String),

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input is not whitened: {0}")]
    NotWhitened(String),

    #[error("iteration produced a non-finite update")]
    NonFiniteUpdate,

    #[error("ICA non-convergence: no restart reached tolerance (best delta {best_delta:.3e})")]
    NonConvergence { best_delta: f64 },

    #[error("partition search space too large: {count:.3e} partitions exceeds limit {limit}")]
    SearchSpaceTooLarge { count: f64, limit: u64 },

    #[error("block sizes cannot be assembled from the current clusters")]
    InfeasibleDims,

    #[error("an entire block row/column of the aggregated matrix is zero")]
    ZeroBlockRow,

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit status for the CLI: 0 success, 2 validation error,
    /// 3 numerical failure, 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) | Error::Parse(_) => 2,
            Error::NonConvergence { .. } => 4,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
