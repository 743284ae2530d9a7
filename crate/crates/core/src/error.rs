use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// Row and column are zero-based.
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("sample too small: n = {n}, need at least {min}")]
    SampleTooSmall { n: usize, min: usize },

    #[error("sample too large for a dense distance matrix: n = {n}, cap is {cap}")]
    SampleTooLarge { n: usize, cap: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid distance matrix: {0}")]
    InvalidDistanceMatrix(String),

    #[error("invalid nearest-neighbor graph: {0}")]
    InvalidGraph(String),

    #[error("non-positive variance {0}")]
    NonpositiveVariance(f64),

    #[error("n = {n} is too large for exhaustive enumeration (max {max})")]
    TooLargeForOracle { n: usize, max: usize },

    #[error("unknown response kind '{0}'")]
    UnknownKind(String),

    #[error("degenerate signal: pooled variance is zero, noise level undefined for r2 = {r2}")]
    DegenerateSignal { r2: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degree bound violated: {0}")]
    BoundViolation(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: u64, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    /// True for errors that signal a broken internal invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::BoundViolation(_) | Error::NonpositiveVariance(_))
    }
}
