use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch { expected: (usize, usize), actual: (usize, usize) },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point is at or behind the camera plane (z = {z})")]
    BehindCamera { z: f64 },

    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),

    #[error("too few usable observations: need at least 2, found {found}")]
    TooFewPoints { found: usize },

    #[error("degenerate variance in sampled monocular depths ({variance:e})")]
    DegenerateVariance { variance: f64 },

    #[error("no overlapping non-hole cells")]
    NoOverlap,

    #[error("no valid patch for correlation loss")]
    NoValidPatch,

    #[error("render cache is stale: cloud or camera changed since the forward pass")]
    StaleForward,

    #[error("training diverged at iteration {iteration}: {what} is not finite")]
    Diverged { iteration: usize, what: String },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable tag used by the command-line error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Format(_) => "format",
            Error::DimensionMismatch { .. } => "dimension",
            Error::InvalidInput(_) => "invalid_input",
            Error::BehindCamera { .. } => "behind_camera",
            Error::NonPositiveDepth(_) => "non_positive_depth",
            Error::TooFewPoints { .. } => "too_few_points",
            Error::DegenerateVariance { .. } => "degenerate_variance",
            Error::NoOverlap => "no_overlap",
            Error::NoValidPatch => "no_valid_patch",
            Error::StaleForward => "stale_forward",
            Error::Diverged { .. } => "diverged",
            Error::Config(_) => "config",
        }
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// Length check for flat per-pixel buffers.
pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    check_dims((expected, 1), (actual, 1))
}
