use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulation and decoding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A constructed value violates one of its invariants.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(
        "depth {depth_m} m at pixel ({x}, {y}) is outside the PSF bank range [{z_min}, {z_max}] m"
    )]
    DepthOutOfRange {
        x: usize,
        y: usize,
        depth_m: f64,
        z_min: f64,
        z_max: f64,
    },

    #[error("event at ({x}, {y}) lies outside the {width}x{height} frame")]
    EventOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },

    #[error("no usable depth points (all below the confidence floor)")]
    NoUsablePoints,

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
