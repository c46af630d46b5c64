use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the analysis library.
///
/// Variants are split into validation failures (bad input, bad config) and
/// numerical failures (ill-conditioned covariance, solver non-convergence);
/// see [`Error::is_numerical`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("channel count mismatch at {location}: expected {expected}, found {found}")]
    ChannelCount {
        expected: usize,
        found: usize,
        location: String,
    },

    #[error("invalid montage: {0}")]
    Montage(String),

    #[error("epoch window overruns the recording for trial(s) {trials:?}")]
    WindowOverrun { trials: Vec<usize> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("filter design error: {0}")]
    FilterDesign(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("composite covariance is numerically singular (smallest eigenvalue {smallest_eigenvalue:e})")]
    Conditioning { smallest_eigenvalue: f64 },

    #[error("degenerate epoch: trial {trial} has a zero-variance projected signal")]
    DegenerateEpoch { trial: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("svm solver did not converge after {iterations} pair updates (duality gap {gap:e})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("degenerate variance: paired differences are constant and non-zero ({mean_diff})")]
    DegenerateVariance { mean_diff: f64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("stage `{stage}` failed (input hash {input_hash}): {source}")]
    Stage {
        stage: String,
        input_hash: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Conditioning { .. }
            | Error::DegenerateEpoch { .. }
            | Error::NonConvergence { .. }
            | Error::DegenerateVariance { .. } => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
