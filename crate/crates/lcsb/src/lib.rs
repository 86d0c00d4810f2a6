//! 1-bit feedback acquisition and reconstruction of spectrum-sparse signals.
//!
//! The transmitter compares each complex sample against an adaptively
//! predicted level and emits only the complex sign of the difference. A
//! sliding-window, sparsity-promoting estimator reconstructs the spectral
//! state from those sign bits inside the feedback loop; the same estimator at
//! the receiver rebuilds the signal from the transmitted bits, with an
//! interleaved sparse error-correction iteration that localizes and undoes
//! channel bit flips before they can propagate through the feedback.
//!
//! Module map:
//! * [`model`] — grid, Vandermonde operator, predictor, signs, windows
//! * [`siggen`] — synthetic spectrum-sparse test signals
//! * [`estimator`] — the per-sample surrogate-cost update and cubic solver
//! * [`encoder`] — acquisition loop and sign emission
//! * [`channel`] — memoryless bit-flip channel
//! * [`decoder`] — reconstruction with optional error correction
//! * [`stream`] — the LCSB stream file format
//! * [`bench`] — metrics, table sweeps and the off-grid scenario
//! * [`config`] — TOML experiment configuration

pub mod bench;
pub mod channel;
pub mod config;
pub mod decoder;
pub mod encoder;
mod error;
pub mod estimator;
pub mod model;
pub mod siggen;
pub mod stream;

pub use error::{Error, Result};
pub use model::C64;
