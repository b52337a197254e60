use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    /// The Gibbs kernel (or a plan derived from it) has a row or column with
    /// no positive entry, typically because `exp(-C/eps)` underflowed.
    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("newton step {iteration} failed: {reason}")]
    NewtonStepFailed { iteration: usize, reason: String },

    #[error("newton step {iteration} overflowed while rescaling the plan")]
    StepOverflow { iteration: usize },

    #[error("inconsistent linear system: kernel defect {defect:e} exceeds {threshold:e}")]
    InconsistentSystem { defect: f64, threshold: f64 },

    #[error("invalid preconditioner: {0}")]
    InvalidPreconditioner(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("not enough points: need {needed}, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: byte {offset}: {message}", path.display())]
    ParseBinary {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
