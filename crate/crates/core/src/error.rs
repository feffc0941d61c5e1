use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: {message}")]
    InvalidValue {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid subject at position {index}: {message}")]
    InvalidSubject { index: usize, message: String },

    #[error("covariate `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("no events in data (every subject censored)")]
    NoEvents,

    #[error("no censoring events")]
    NoCensoringEvents,

    #[error("synthetic indicators are all equal ({0}); cure model is not identifiable")]
    DegenerateIndicators(f64),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("singular information matrix in {0}")]
    SingularInformation(&'static str),

    #[error("{what} did not converge after {iterations} iterations (gradient norm {grad_norm:.3e}, coefficient norm {theta_norm:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        grad_norm: f64,
        theta_norm: f64,
    },

    #[error("{what} diverged at iteration {iteration}: coefficient norm {theta_norm:.3e} exceeds {limit:e} (possible separation)")]
    Divergence {
        what: &'static str,
        iteration: usize,
        theta_norm: f64,
        limit: f64,
    },

    #[error("no training points within bandwidth of index value {index_value}")]
    EmptyNeighborhood { index_value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("index sets overlap at coefficient {0}")]
    OverlappingSets(usize),

    #[error("{failed} of {total} bootstrap replicates failed (limit 5%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("root bracket not found: {0}")]
    BracketNotFound(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Coarse classification used by front ends to pick exit statuses.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) | Error::OverlappingSets(_) | Error::BracketNotFound(_) => {
                ErrorKind::Config
            }
            Error::RankDeficient
            | Error::SingularInformation(_)
            | Error::NonConvergence { .. }
            | Error::Divergence { .. }
            | Error::TooManyFailures { .. } => ErrorKind::Convergence,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Convergence,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
