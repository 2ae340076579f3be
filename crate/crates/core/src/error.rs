use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {what}: {value}")]
    InvalidArgument { what: &'static str, value: f64 },

    #[error("satellite and ground station positions coincide")]
    CoincidentPositions,

    #[error("satellite index {index} out of range for orbit with {count} satellites")]
    SatelliteIndex { index: usize, count: usize },

    #[error("coarse scan step {0} s exceeds the 10 s limit")]
    CoarseStepTooLarge(f64),

    #[error("satellite {satellite} is visible at horizon endpoint t = {time} s; endpoints must lie in off-time")]
    EndpointInPass { satellite: usize, time: f64 },

    #[error("link unavailable (zero data rate)")]
    LinkUnavailable,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("unknown satellite {0}")]
    UnknownSatellite(usize),

    #[error("infeasible schedule for satellite {satellite} at pass {pass}: short by {deficit_s:.3} s")]
    Infeasible {
        satellite: usize,
        pass: usize,
        deficit_s: f64,
    },

    #[error("synchronous aggregation needs updates from all {expected} satellites, got {found}")]
    MissingUpdates { expected: usize, found: usize },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("runs are not comparable: {0}")]
    Mismatch(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Errors caused by user input rather than a broken invariant.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Internal(_) | Error::Io(_))
    }

    pub(crate) fn invalid(what: &'static str, value: f64) -> Self {
        Error::InvalidArgument { what, value }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
