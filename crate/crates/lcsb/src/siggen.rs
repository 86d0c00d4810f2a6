//! Synthetic spectrum-sparse test signals.
//!
//! Active grid components are chosen uniformly at random, amplitudes are
//! complex Gaussian with unit expected power (real/imaginary parts i.i.d.
//! N(0, 1/2)), and the state evolves by the exact one-step recurrence.
//! Off-grid components fold onto their base bin as time-varying amplitudes,
//! and optional Gaussian pre-quantization noise is added to the samples only
//! (never to the ground-truth states).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{GridConfig, OffGridConfig};
use crate::error::{Error, Result};
use crate::model::{predict_state, FrequencyGrid, SpectralState, C64};

/// Full description of a signal to synthesize.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub grid: FrequencyGrid,
    /// Fraction of active components; `round(k * N)` must be at least 1.
    pub sparsity_factor: f64,
    pub num_samples: usize,
    pub seed: u64,
    pub offgrid: Vec<OffGridConfig>,
    /// Standard deviation of the additive Gaussian noise per real axis.
    pub noise_std: f64,
    /// Real N(0,1) amplitudes instead of the complex unit-power convention.
    pub real_amplitudes: bool,
}

impl SignalSpec {
    pub fn new(grid: FrequencyGrid, sparsity_factor: f64, num_samples: usize, seed: u64) -> SignalSpec {
        SignalSpec {
            grid,
            sparsity_factor,
            num_samples,
            seed,
            offgrid: Vec::new(),
            noise_std: 0.0,
            real_amplitudes: false,
        }
    }

    /// Number of active on-grid components, `round(k * N)`.
    pub fn active_count(&self) -> usize {
        (self.sparsity_factor * self.grid.n() as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sparsity_factor > 0.0 && self.sparsity_factor <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "sparsity factor {} outside (0, 1]",
                self.sparsity_factor
            )));
        }
        if self.active_count() == 0 {
            return Err(Error::InvalidParam(
                "sparsity factor rounds to zero active components".into(),
            ));
        }
        if self.num_samples == 0 {
            return Err(Error::InvalidParam("num_samples must be positive".into()));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "noise_std must be non-negative, got {}",
                self.noise_std
            )));
        }
        for (idx, og) in self.offgrid.iter().enumerate() {
            if og.base_index >= self.grid.n() {
                return Err(Error::InvalidParam(format!(
                    "off-grid component {idx} folds onto bin {} outside the grid",
                    og.base_index
                )));
            }
            if og.gamma > 0.0 {
                return Err(Error::InvalidParam(format!(
                    "off-grid component {idx} has growing decay rate {}",
                    og.gamma
                )));
            }
        }
        Ok(())
    }
}

/// A synthesized signal together with its per-sample ground-truth states.
#[derive(Debug, Clone)]
pub struct GeneratedSignal {
    pub samples: Vec<C64>,
    /// `true_states[m][i]` is the folded component value at sample `m`.
    pub true_states: Vec<Vec<C64>>,
    pub spec: SignalSpec,
}

/// Synthesizes a signal from its spec. Fully deterministic for a fixed seed.
pub fn generate(spec: &SignalSpec) -> Result<GeneratedSignal> {
    spec.validate()?;
    let n = spec.grid.n();
    let tau = spec.grid.tau();
    let predictor = spec.grid.predictor();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut support = rand::seq::index::sample(&mut rng, n, spec.active_count()).into_vec();
    support.sort_unstable();

    let scale = (0.5f64).sqrt();
    let mut state = SpectralState::zero(n, 0);
    for &i in &support {
        let amp = if spec.real_amplitudes {
            let re: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, 0.0)
        } else {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re * scale, im * scale)
        };
        state.amps[i] = amp;
    }

    let mut samples = Vec::with_capacity(spec.num_samples);
    let mut true_states = Vec::with_capacity(spec.num_samples);
    for m in 0..spec.num_samples {
        if m > 0 {
            state = predict_state(&state, &predictor)?;
        }
        let mut full = state.amps.clone();
        for og in &spec.offgrid {
            let z_base = spec.grid.exponents()[og.base_index];
            let exponent = z_base + C64::new(og.gamma, og.delta_omega);
            let t = m as f64 * tau;
            full[og.base_index] +=
                C64::new(og.amplitude[0], og.amplitude[1]) * (exponent * t).exp();
        }
        let mut x: C64 = full.iter().sum();
        if spec.noise_std > 0.0 {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            x += C64::new(re * spec.noise_std, im * spec.noise_std);
        }
        samples.push(x);
        true_states.push(full);
    }

    Ok(GeneratedSignal {
        samples,
        true_states,
        spec: spec.clone(),
    })
}

// ── JSON export/import ───────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalSpecFile {
    grid: GridConfig,
    sparsity_factor: f64,
    num_samples: usize,
    seed: u64,
    #[serde(default)]
    offgrid: Vec<OffGridConfig>,
    #[serde(default)]
    noise_std: f64,
    #[serde(default)]
    real_amplitudes: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalFile {
    spec: SignalSpecFile,
    samples: Vec<[f64; 2]>,
    true_states: Vec<Vec<[f64; 2]>>,
}

/// Serializes a generated signal to the JSON document used by the CLI.
pub fn signal_to_json(signal: &GeneratedSignal) -> Result<String> {
    let file = SignalFile {
        spec: SignalSpecFile {
            grid: GridConfig::from_grid(&signal.spec.grid),
            sparsity_factor: signal.spec.sparsity_factor,
            num_samples: signal.spec.num_samples,
            seed: signal.spec.seed,
            offgrid: signal.spec.offgrid.clone(),
            noise_std: signal.spec.noise_std,
            real_amplitudes: signal.spec.real_amplitudes,
        },
        samples: signal.samples.iter().map(|x| [x.re, x.im]).collect(),
        true_states: signal
            .true_states
            .iter()
            .map(|row| row.iter().map(|x| [x.re, x.im]).collect())
            .collect(),
    };
    Ok(serde_json::to_string(&file)?)
}

/// Parses a signal JSON document back into a [`GeneratedSignal`].
pub fn signal_from_json(text: &str) -> Result<GeneratedSignal> {
    let file: SignalFile = serde_json::from_str(text)?;
    let grid = file.spec.grid.to_grid()?;
    let spec = SignalSpec {
        grid,
        sparsity_factor: file.spec.sparsity_factor,
        num_samples: file.spec.num_samples,
        seed: file.spec.seed,
        offgrid: file.spec.offgrid,
        noise_std: file.spec.noise_std,
        real_amplitudes: file.spec.real_amplitudes,
    };
    spec.validate()?;
    let samples: Vec<C64> = file.samples.iter().map(|p| Complex64::new(p[0], p[1])).collect();
    let true_states: Vec<Vec<C64>> = file
        .true_states
        .iter()
        .map(|row| row.iter().map(|p| Complex64::new(p[0], p[1])).collect())
        .collect();
    if samples.len() != spec.num_samples || true_states.len() != spec.num_samples {
        return Err(Error::Config(
            "sample/state count does not match num_samples".into(),
        ));
    }
    Ok(GeneratedSignal {
        samples,
        true_states,
        spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> SignalSpec {
        let grid = FrequencyGrid::uniform_imaginary(40, 10.0, 5e-4, 10).unwrap();
        SignalSpec::new(grid, 0.1, 64, 7)
    }

    #[test]
    fn support_size_is_round_k_n() {
        let spec = base_spec();
        let sig = generate(&spec).unwrap();
        let active = sig.true_states[0].iter().filter(|a| a.norm() > 0.0).count();
        assert_eq!(active, 4);
        assert_eq!(spec.active_count(), 4);
    }

    #[test]
    fn paper_scale_support_is_25() {
        let grid = FrequencyGrid::uniform_imaginary(500, 10.0, 5e-4, 50).unwrap();
        let spec = SignalSpec::new(grid, 0.05, 1, 3);
        assert_eq!(spec.active_count(), 25);
    }

    #[test]
    fn sample_is_sum_of_true_state() {
        let sig = generate(&base_spec()).unwrap();
        for m in 0..sig.samples.len() {
            let sum: C64 = sig.true_states[m].iter().sum();
            let norm1: f64 = sig.true_states[m].iter().map(|a| a.norm()).sum();
            assert!((sig.samples[m] - sum).norm() < 1e-9 * norm1.max(1e-30));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = base_spec();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        let ja = signal_to_json(&a).unwrap();
        let jb = signal_to_json(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn different_seeds_differ() {
        let mut spec = base_spec();
        let a = generate(&spec).unwrap();
        spec.seed = 8;
        let b = generate(&spec).unwrap();
        assert_ne!(a.samples, b.samples);
    }

    #[test]
    fn offgrid_amplitude_decays_per_step() {
        let mut spec = base_spec();
        spec.sparsity_factor = 0.025; // one active component elsewhere
        spec.offgrid = vec![OffGridConfig {
            gamma: -1.5,
            delta_omega: 1.0,
            base_index: 20,
            amplitude: [1.0, 0.0],
        }];
        let sig = generate(&spec).unwrap();
        let tau = spec.grid.tau();
        // remove the on-grid part of bin 20 (zero unless randomly selected)
        let decay = (-1.5f64 * tau).exp();
        for m in 0..sig.samples.len() - 1 {
            let now = sig.true_states[m][20];
            let next = sig.true_states[m + 1][20];
            if now.norm() > 0.0 {
                assert!(
                    (next.norm() / now.norm() - decay).abs() < 1e-9,
                    "sample {m}: ratio {}",
                    next.norm() / now.norm()
                );
            }
        }
    }

    #[test]
    fn offgrid_zero_offsets_match_on_grid_component() {
        // gamma = 0, delta_omega = 0 folds to an exact on-grid component
        let grid = FrequencyGrid::uniform_imaginary(8, 10.0, 1e-3, 4).unwrap();
        let mut spec = SignalSpec::new(grid.clone(), 0.125, 32, 5);
        spec.offgrid = vec![OffGridConfig {
            gamma: 0.0,
            delta_omega: 0.0,
            base_index: 3,
            amplitude: [0.5, -0.25],
        }];
        let sig = generate(&spec).unwrap();
        let z = grid.exponents()[3];
        for m in 0..32 {
            let t = m as f64 * grid.tau();
            let direct = C64::new(0.5, -0.25) * (z * t).exp();
            let on_grid_part = sig.true_states[m][3]
                - direct;
            // the residue is whatever random on-grid component landed there,
            // which must itself evolve exactly like the grid exponent
            if m > 0 {
                let prev = sig.true_states[m - 1][3]
                    - C64::new(0.5, -0.25) * (z * ((m - 1) as f64 * grid.tau())).exp();
                let expect = prev * (z * grid.tau()).exp();
                assert!((on_grid_part - expect).norm() < 1e-10 * expect.norm().max(1.0));
            }
        }
    }

    #[test]
    fn noise_perturbs_samples_not_states() {
        let mut spec = base_spec();
        spec.noise_std = 0.1;
        let noisy = generate(&spec).unwrap();
        spec.noise_std = 0.0;
        let clean = generate(&spec).unwrap();
        assert_eq!(noisy.true_states, clean.true_states);
        assert_ne!(noisy.samples, clean.samples);
        for m in 0..spec.num_samples {
            let sum: C64 = noisy.true_states[m].iter().sum();
            assert!((noisy.samples[m] - sum).norm() < 1.0); // noise is small
        }
    }

    #[test]
    fn real_amplitude_switch_zeroes_imaginary_parts() {
        let mut spec = base_spec();
        spec.real_amplitudes = true;
        let sig = generate(&spec).unwrap();
        for a in &sig.true_states[0] {
            assert_eq!(a.im, 0.0);
        }
        assert!(sig.true_states[0].iter().any(|a| a.re != 0.0));
    }

    #[test]
    fn rejects_zero_support() {
        let grid = FrequencyGrid::uniform_imaginary(4, 10.0, 5e-4, 2).unwrap();
        let spec = SignalSpec::new(grid, 0.05, 8, 1); // rounds to 0
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn rejects_out_of_range_offgrid() {
        let mut spec = base_spec();
        spec.offgrid = vec![OffGridConfig {
            gamma: 0.0,
            delta_omega: 1.0,
            base_index: 40,
            amplitude: [1.0, 0.0],
        }];
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut spec = base_spec();
        spec.noise_std = 0.05;
        let sig = generate(&spec).unwrap();
        let json = signal_to_json(&sig).unwrap();
        let back = signal_from_json(&json).unwrap();
        assert_eq!(sig.samples, back.samples);
        assert_eq!(sig.true_states, back.true_states);
        assert_eq!(sig.spec, back.spec);
    }
}
