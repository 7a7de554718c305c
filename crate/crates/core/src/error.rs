use thiserror::Error;

/// Errors raised across the crate.
#[derive(Error, Debug)]
pub enum Error {
    #[error("rejected input: {0}")]
    RejectedInput(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("observation sampler not ready: no replay data and no trained VAE")]
    SamplerNotReady,
    #[error("missing ground truth for step {0}")]
    MissingGroundTruth(usize),
    #[error("no runs converged: {0}")]
    NoConvergedRuns(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("plot error: {0}")]
    Plot(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn reject<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::RejectedInput(msg.into()))
}
