//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the acquisition/reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A frequency grid violated one of its invariants.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A parameter was outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Two vectors that must agree in length did not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A non-finite value was encountered where a finite one is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The reconstruction produced a non-finite state.
    #[error("diverged at sample {sample}: {detail}")]
    Diverged { sample: usize, detail: String },

    /// A serialized sign stream could not be parsed.
    #[error("malformed stream: {0}")]
    MalformedStream(String),

    /// An experiment configuration could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
