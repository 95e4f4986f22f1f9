use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("region of interest is empty")]
    EmptyRoi,
    #[error("histogram has zero total")]
    ZeroTotal,
    #[error("marker exceeds mask at pixel ({0}, {1})")]
    MarkerAboveMask(usize, usize),
    #[error("distribution has fewer than two populated intensity levels")]
    DegenerateDistribution,
    #[error("seed mask is empty")]
    EmptySeed,
    #[error("explicit scheme unstable: mu*dt = {0} must be < 0.25")]
    UnstableTimeStep(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("nucleus extends outside its clump")]
    NucleusOutsideClump,
    #[error("cannot place nucleus {0}: phantom too crowded")]
    PhantomPlacement(usize),
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("{0}")]
    Layout(String),
}

pub type Result<T> = std::result::Result<T, Error>;
