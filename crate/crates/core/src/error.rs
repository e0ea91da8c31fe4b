use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The x-update matrix `rho*I - 2*D^T D` could not be factored; rho is too small.
    #[error("x-update matrix is not positive definite (rho = {rho})")]
    NotPositiveDefinite { rho: f64 },

    #[error("ADMM did not converge within {max_iter} iterations (last step {last_step:e})")]
    MaxIterExceeded { max_iter: usize, last_step: f64 },

    /// Iterates became non-finite; only possible with an explicit rho that is too small.
    #[error("ADMM diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    /// Every coordinate was thresholded away; lambda is too large for this data.
    #[error("component collapsed to zero (lambda = {lambda}, rho = {rho})")]
    DegenerateComponent { lambda: f64, rho: f64 },

    #[error("kernel system factorization failed")]
    SolveFailure,

    #[error("component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("person {index}: {source}")]
    Person {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("variant {variant}: {source}")]
    Variant {
        variant: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("labels are not contiguous blocks (line {line})")]
    NonContiguousLabels { line: u64 },

    #[error("line {line}: expected {expected} pixel values, found {found}")]
    BadPixelCount {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("{path}: {message}")]
    PgmFormat { path: PathBuf, message: String },

    #[error("{path}: image is {found:?}, expected {expected:?}")]
    InconsistentDimensions {
        path: PathBuf,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("no label for {0}")]
    MissingLabel(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable name for structured CLI output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::MaxIterExceeded { .. } => "MaxIterExceeded",
            Error::DegenerateComponent { .. } => "DegenerateComponent",
            Error::Diverged { .. } => "Diverged",
            Error::SolveFailure => "SolveFailure",
            Error::Component { source, .. }
            | Error::Person { source, .. }
            | Error::Variant { source, .. } => source.kind(),
            Error::Parse { .. } => "ParseError",
            Error::NonContiguousLabels { .. } => "NonContiguousLabels",
            Error::BadPixelCount { .. } => "BadPixelCount",
            Error::PgmFormat { .. } => "PgmFormatError",
            Error::InconsistentDimensions { .. } => "InconsistentDimensions",
            Error::MissingLabel(_) => "MissingLabel",
            Error::ModelFormat(_) => "ModelFormat",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }

    /// Unwraps context layers (component, person, variant).
    pub fn root(&self) -> &Error {
        match self {
            Error::Component { source, .. }
            | Error::Person { source, .. }
            | Error::Variant { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn in_component(self, index: usize) -> Error {
        Error::Component {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_person(self, index: usize) -> Error {
        Error::Person {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::ShapeMismatch(msg.into())
}
