use std::fmt;

use thiserror::Error;

/// Errors produced by the solver, the channel generator and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("factorization failed: {0}")]
    FactorizationFailure(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("multiplier bracket failure: {0}")]
    BracketFailure(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input")]
    EmptyInput,

    #[error("iteration {iteration}, {step}: {source}")]
    Iteration {
        iteration: usize,
        step: Step,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Algorithm step at which an iteration failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Precoder,
    Relay,
    Receiver,
    Weight,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Step::Precoder => "precoder update",
            Step::Relay => "relay update",
            Step::Receiver => "receiver update",
            Step::Weight => "weight update",
        };
        f.write_str(s)
    }
}

impl Error {
    pub(crate) fn at(self, iteration: usize, step: Step) -> Self {
        Error::Iteration {
            iteration,
            step,
            source: Box::new(self),
        }
    }
}
