use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
///
/// `TooFewEdgePoints` and `NoFeasibleActions` mean the input had nothing to
/// detect; callers that script the pipeline treat them differently from I/O
/// or configuration problems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The three points lie on a line (or coincide); no circle passes
    /// through them. Detected exactly on the integer denominator.
    #[error("triplet is collinear or degenerate")]
    CollinearPoints,

    /// Rounded radius below 1; the rasterizer has nothing to draw.
    #[error("radius {0} is too small to rasterize")]
    RadiusTooSmall(f64),

    /// Every ideal perimeter pixel fell outside the image bounds.
    #[error("circle perimeter lies entirely outside the image")]
    EmptyPerimeter,

    /// Fewer sampled edge points than the three needed for one triplet.
    #[error("too few edge points: need at least {needed}, have {found}")]
    TooFewEdgePoints { needed: usize, found: usize },

    /// Every candidate triplet was rejected by the radius, clipping, or
    /// duplicate filters.
    #[error("no feasible candidate circles in the configured radius range")]
    NoFeasibleActions,

    /// Scene generation could not satisfy the separation constraints.
    #[error("placed only {placed} of {requested} circles after {attempts} attempts")]
    PlacementFailure {
        requested: usize,
        placed: usize,
        attempts: usize,
    },

    #[error("input is {got_w}x{got_h} but the action set was built for {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }
}
