use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation pipeline.
#[derive(Debug, Error)]
pub enum OiaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite: eigenvalue {eigenvalue:e} below floor {floor:e}")]
    NotPositiveDefinite { eigenvalue: f64, floor: f64 },

    /// Rank guard failure; Monte Carlo drivers discard and redraw the trial.
    #[error("ill-conditioned channel: {0}")]
    IllConditionedChannel(String),

    /// Channel with no usable singular mode.
    #[error("degenerate channel: all singular values are zero")]
    DegenerateChannel,

    #[error("unsupported geometry: nr = {nr} < nt = {nt} (receive antennas must be at least transmit antennas)")]
    UnsupportedGeometry { nr: usize, nt: usize },

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl OiaError {
    /// True for the channel-realization failures a Monte Carlo driver
    /// should answer by drawing a replacement trial.
    pub fn is_discardable(&self) -> bool {
        matches!(self, OiaError::IllConditionedChannel(_) | OiaError::DegenerateChannel)
    }
}

pub type Result<T> = std::result::Result<T, OiaError>;
