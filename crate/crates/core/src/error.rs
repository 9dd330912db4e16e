use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A constructor or operation received structurally invalid data.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A non-finite value was found where finite data is required.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// A time index does not leave room for the largest lag.
    #[error("time index {t} is smaller than the maximum lag {max_lag}")]
    IndexOutOfRange { t: usize, max_lag: usize },
    /// A layout or plan names a channel that is not present.
    #[error("channel '{0}' is missing")]
    ChannelMissing(String),
    /// A realization does not contain enough samples for the requested lags.
    #[error("realization {realization} has {len} steps but the maximum lag is {max_lag}")]
    TooShort {
        realization: usize,
        len: usize,
        max_lag: usize,
    },
    /// A subsample size outside `1..=rows`.
    #[error("cannot draw {k} rows from a design with {rows} rows")]
    InvalidCount { k: usize, rows: usize },
    /// The basis would exceed the configured size cap.
    #[error("basis cardinality {size} exceeds the cap of {cap}")]
    SizeOverflow { size: usize, cap: usize },
    /// Fewer rows than unknowns in a least-squares problem.
    #[error("least squares is underdetermined: {rows} rows for {cols} unknowns")]
    Underdetermined { rows: usize, cols: usize },
    /// Arithmetic produced a non-finite value.
    #[error("numeric overflow: {0}")]
    Numeric(String),
    /// A free-run prediction left the admissible range.
    #[error("free run diverged at step {step}: |y| = {value:e} exceeds guard {guard:e}")]
    NumericBlowup { step: usize, value: f64, guard: f64 },
    /// Two series or vectors that must agree in length do not.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    /// Field frames or coefficient blocks of incompatible shape.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// Two series (or a model and a series) sampled at different steps.
    #[error("time step mismatch: expected dt = {expected}, found {found}")]
    DtMismatch { expected: f64, found: f64 },
    /// A statistic was requested over an empty range.
    #[error("empty series after skipping {skip} steps")]
    Empty { skip: usize },
    /// A non-positive physical parameter.
    #[error("parameter '{0}' must be strictly positive")]
    NonPositiveParam(&'static str),
    /// A transform id that is not built in.
    #[error("unknown transform '{0}'")]
    UnknownTransform(String),
    /// A moving-average window longer than the series.
    #[error("window of {window} steps is longer than the series ({len} steps)")]
    WindowTooLong { window: usize, len: usize },
    /// A manifold plan that fails validation.
    #[error("plan stage '{stage}', field '{field}': {message}")]
    Plan {
        stage: String,
        field: String,
        message: String,
    },
    /// A training realization is missing the ground truth of a model stage.
    #[error("realization {realization} has no ground truth for stage '{stage}'")]
    MissingGroundTruth { stage: String, realization: usize },
    /// A plan whose stages reference channels that are produced later.
    #[error("stage '{stage}' depends on '{channel}', which is not produced earlier in the chain")]
    CyclicPlan { stage: String, channel: String },
    /// An error raised while executing a named manifold stage.
    #[error("stage '{stage}': {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    /// A file did not match its expected schema.
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures caused by numerics (instability, overflow), as
    /// opposed to invalid configuration or I/O.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            Error::Numeric(_) | Error::NumericBlowup { .. } | Error::NonFinite(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self.root(), Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
