//! Receiver-side reconstruction with interleaved sparse error correction.
//!
//! The decoder mirrors the encoder's feedback loop exactly, driven by the
//! received (possibly corrupted) sign stream. Bit flips would propagate
//! through the predicted levels, so a secondary iteration estimates per-axis
//! binary flip-indicator vectors over the window: one projected-gradient step
//! on a relaxed `[0,1]` formulation followed by stochastic rounding, once per
//! sample per axis.
//!
//! The gradient compares received signs against the signs the current
//! estimate implies for the window. By default the correction step runs right
//! after the estimator update, so the comparison uses the estimate fitted to
//! the window in question; the spec-literal pre-update placement is available
//! behind [`EcStage::Pre`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{Estimator, EstimatorParams};
use crate::model::{FrequencyGrid, Sign, SignSymbol, SpectralState, Vandermonde, C64};
use crate::stream::SignStream;

// ── Error-correction parameters ──────────────────────────────────────────────

/// Placement of the correction step within each sample's processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EcStage {
    /// After the estimator update, against the freshly fitted state.
    #[default]
    Post,
    /// Before the estimator update, against the prior state.
    Pre,
}

/// Sparse error-correction tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcParams {
    /// l1 weight on the flip indicators.
    pub theta: f64,
    /// Normalized gradient step size.
    pub epsilon: f64,
    /// Seed for the stochastic rounding draws.
    pub seed: u64,
    pub enabled: bool,
    /// Gradient/rounding iterations per sample per axis.
    pub steps_per_sample: usize,
    pub stage: EcStage,
}

impl Default for EcParams {
    fn default() -> Self {
        EcParams {
            theta: 4.0,
            epsilon: 0.05,
            seed: 0,
            enabled: false,
            steps_per_sample: 1,
            stage: EcStage::Post,
        }
    }
}

impl EcParams {
    pub fn disabled() -> EcParams {
        EcParams::default()
    }

    pub fn enabled_with(theta: f64, epsilon: f64, seed: u64) -> EcParams {
        EcParams {
            theta,
            epsilon,
            seed,
            enabled: true,
            ..EcParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled {
            if !(self.theta.is_finite() && self.theta > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "theta must be positive, got {}",
                    self.theta
                )));
            }
            if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "epsilon must be positive, got {}",
                    self.epsilon
                )));
            }
            if self.steps_per_sample == 0 {
                return Err(Error::InvalidParam(
                    "steps_per_sample must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }
}

// ── Error vector ─────────────────────────────────────────────────────────────

/// Which axis of the complex signs a vector corrects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Real,
    Imag,
}

impl Axis {
    fn part(self, v: C64) -> f64 {
        match self {
            Axis::Real => v.re,
            Axis::Imag => v.im,
        }
    }
}

/// Window-aligned flip estimate for one axis: the relaxed values in `[0,1]`
/// and their stochastic rounding in `{0,1}`, newest position first.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVector {
    pub relaxed: Vec<f64>,
    pub binary: Vec<bool>,
    pub axis: Axis,
}

impl ErrorVector {
    pub fn zeros(len: usize, axis: Axis) -> ErrorVector {
        ErrorVector {
            relaxed: vec![0.0; len],
            binary: vec![false; len],
            axis,
        }
    }

    pub fn len(&self) -> usize {
        self.relaxed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relaxed.is_empty()
    }

    pub fn flip_count(&self) -> u32 {
        self.binary.iter().map(|&b| b as u32).sum()
    }

    /// The window-slide operator: every entry moves one position toward the
    /// oldest end, the oldest entry drops out and the newest position gets a
    /// zero initial estimate.
    pub fn slide(&self) -> ErrorVector {
        let mut relaxed = Vec::with_capacity(self.len());
        let mut binary = Vec::with_capacity(self.len());
        relaxed.push(0.0);
        binary.push(false);
        relaxed.extend_from_slice(&self.relaxed[..self.len().saturating_sub(1)]);
        binary.extend_from_slice(&self.binary[..self.len().saturating_sub(1)]);
        ErrorVector {
            relaxed,
            binary,
            axis: self.axis,
        }
    }
}

/// Rounds each relaxed value up with probability equal to the value itself:
/// `out[i] = 1` iff `relaxed[i] > u_i` for a fresh uniform `u_i` in `[0,1)`.
pub fn stochastic_round<R: Rng>(relaxed: &[f64], rng: &mut R) -> Vec<bool> {
    relaxed.iter().map(|&t| t > rng.random::<f64>()).collect()
}

/// One projected-gradient + stochastic-rounding step for one axis.
///
/// `e_prev` must already be slid for the current sample. `received_signs`
/// are the raw received window signs (newest first, values in {+1, -1});
/// `s_hat` and `levels` supply the model-implied signs via
/// `sgn(axis(Phi s_hat - L))`. A zero gradient skips the step.
pub fn ec_step<R: Rng>(
    e_prev: &ErrorVector,
    received_signs: &[f64],
    s_hat: &SpectralState,
    levels: &[C64],
    phi: &Vandermonde,
    params: &EcParams,
    rng: &mut R,
) -> ErrorVector {
    let m = e_prev.len();
    assert_eq!(received_signs.len(), m, "received sign window length");
    assert_eq!(levels.len(), m, "level window length");

    let fitted = phi.apply_truncated(&s_hat.amps, m);
    let mut d = Vec::with_capacity(m);
    for k in 0..m {
        let model_sign = Sign::of(e_prev.axis.part(fitted[k] - levels[k])).value();
        let b = received_signs[k];
        let corrected = b * (1.0 - 2.0 * (e_prev.binary[k] as u8 as f64));
        d.push(-4.0 * b * (corrected - model_sign) + params.theta);
    }
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return e_prev.clone();
    }
    let relaxed: Vec<f64> = e_prev
        .binary
        .iter()
        .zip(&d)
        .map(|(&e, &dk)| {
            let t = e as u8 as f64 - params.epsilon * dk / norm;
            t.clamp(0.0, 1.0)
        })
        .collect();
    let binary = stochastic_round(&relaxed, rng);
    ErrorVector {
        relaxed,
        binary,
        axis: e_prev.axis,
    }
}

// ── Decoder ──────────────────────────────────────────────────────────────────

/// Per-sample decoder output.
#[derive(Debug, Clone, Copy)]
pub struct DecodeStep {
    /// Level the received sign was interpreted against.
    pub level: C64,
    /// Current flip-estimate counts for the (real, imaginary) axes.
    pub flips: [u32; 2],
}

/// Receiver loop: the same estimator as the encoder plus the per-axis error
/// correction state.
#[derive(Debug, Clone)]
pub struct Decoder {
    estimator: Estimator,
    ec: EcParams,
    err_re: ErrorVector,
    err_im: ErrorVector,
    rng: ChaCha8Rng,
    next_level: C64,
    sample_index: usize,
}

impl Decoder {
    pub fn new(grid: &FrequencyGrid, params: EstimatorParams, ec: EcParams) -> Result<Decoder> {
        ec.validate()?;
        let m = grid.window_len();
        Ok(Decoder {
            estimator: Estimator::new(grid, params)?,
            ec,
            err_re: ErrorVector::zeros(m, Axis::Real),
            err_im: ErrorVector::zeros(m, Axis::Imag),
            rng: ChaCha8Rng::seed_from_u64(ec.seed),
            next_level: C64::new(0.0, 0.0),
            sample_index: 0,
        })
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    pub fn state(&self) -> &SpectralState {
        self.estimator.state()
    }

    pub fn error_vectors(&self) -> (&ErrorVector, &ErrorVector) {
        (&self.err_re, &self.err_im)
    }

    /// Window signs with the current flip estimates applied:
    /// `b_corrected = b_hat (1 - 2 e)` per axis per position.
    fn corrected_signs(&self) -> Vec<C64> {
        self.estimator
            .window()
            .signs()
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let re = if self.err_re.binary[k] {
                    s.re.flipped()
                } else {
                    s.re
                };
                let im = if self.err_im.binary[k] {
                    s.im.flipped()
                } else {
                    s.im
                };
                C64::new(re.value(), im.value())
            })
            .collect()
    }

    fn run_ec(&mut self) {
        // The correction needs a full window; flip estimates stay zero while
        // the window is still filling.
        if !self.ec.enabled || !self.estimator.window().is_full() {
            return;
        }
        let signs = self.estimator.window().signs();
        let levels = self.estimator.window().levels();
        let re_signs: Vec<f64> = signs.iter().map(|s| s.re.value()).collect();
        let im_signs: Vec<f64> = signs.iter().map(|s| s.im.value()).collect();
        for _ in 0..self.ec.steps_per_sample {
            self.err_re = ec_step(
                &self.err_re,
                &re_signs,
                self.estimator.state(),
                &levels,
                self.estimator.phi(),
                &self.ec,
                &mut self.rng,
            );
            self.err_im = ec_step(
                &self.err_im,
                &im_signs,
                self.estimator.state(),
                &levels,
                self.estimator.phi(),
                &self.ec,
                &mut self.rng,
            );
        }
    }

    /// Processes one received symbol.
    pub fn step(&mut self, received: SignSymbol) -> Result<DecodeStep> {
        let level = self.next_level;
        self.estimator.push_measurement(received, level);
        self.err_re = self.err_re.slide();
        self.err_im = self.err_im.slide();

        if self.ec.stage == EcStage::Pre {
            self.run_ec();
        }
        let corrected = self.corrected_signs();
        let m = self.sample_index;
        self.estimator
            .update(&corrected)
            .map_err(|e| match e {
                Error::NonFinite(detail) => Error::Diverged { sample: m, detail },
                other => other,
            })?;
        if self.ec.stage == EcStage::Post {
            self.run_ec();
        }

        self.next_level = self.estimator.predict_next_level();
        self.sample_index += 1;
        Ok(DecodeStep {
            level,
            flips: [self.err_re.flip_count(), self.err_im.flip_count()],
        })
    }
}

/// Full traces of a decode pass.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    /// Per-sample state estimates.
    pub states: Vec<Vec<C64>>,
    /// Level each received sign was interpreted against.
    pub levels: Vec<C64>,
    /// Per-sample (real, imaginary) window flip-estimate counts.
    pub flip_counts: Vec<[u32; 2]>,
}

/// Decodes a received stream, recording full traces.
pub fn decode(
    stream: &SignStream,
    grid: &FrequencyGrid,
    params: EstimatorParams,
    ec: EcParams,
) -> Result<DecodeResult> {
    let mut dec = Decoder::new(grid, params, ec)?;
    let mut states = Vec::with_capacity(stream.len());
    let mut levels = Vec::with_capacity(stream.len());
    let mut flip_counts = Vec::with_capacity(stream.len());
    for &sym in &stream.symbols {
        let step = dec.step(sym)?;
        states.push(dec.state().amps.clone());
        levels.push(step.level);
        flip_counts.push(step.flips);
    }
    Ok(DecodeResult {
        states,
        levels,
        flip_counts,
    })
}
