//! Experiment harness: reconstruction-error metric, single pipeline runs,
//! the sparsity/flip-rate sweep table and the off-grid tracking scenario.
//!
//! Monte Carlo runs are embarrassingly parallel; per-run seeds derive from
//! the master seed by hashing the cell coordinates, so results do not depend
//! on execution order and the with/without-correction variants of a cell see
//! identical signals and channels.

use rayon::prelude::*;

use crate::channel::{corrupt, ChannelSpec};
use crate::config::ExperimentConfig;
use crate::decoder::{Decoder, EcParams};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::estimator::EstimatorParams;
use crate::model::{FrequencyGrid, SpectralState, C64};
use crate::siggen::{generate, SignalSpec};
use crate::stream::SignStream;

/// Reported MSE floor in dB for exact recovery.
pub const MSE_FLOOR_DB: f64 = -120.0;

/// Divergence threshold in dB.
pub const DIVERGENCE_DB: f64 = -5.0;

/// Normalized reconstruction error `10 log10(||S - S_hat||^2 / ||S||^2)`,
/// floored at -120 dB. Errors on zero-norm truth.
pub fn mse_db(truth: &SpectralState, estimate: &SpectralState) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::DimensionMismatch(format!(
            "truth has {} entries, estimate has {}",
            truth.len(),
            estimate.len()
        )));
    }
    let denom = truth.norm_sq();
    if denom <= 0.0 {
        return Err(Error::InvalidParam("zero-norm truth state".into()));
    }
    let err: f64 = truth
        .amps
        .iter()
        .zip(&estimate.amps)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    let ratio = err / denom;
    if ratio == 0.0 {
        return Ok(MSE_FLOOR_DB);
    }
    Ok((10.0 * ratio.log10()).max(MSE_FLOOR_DB))
}

fn mse_db_slices(truth: &[C64], estimate: &[C64]) -> f64 {
    let denom: f64 = truth.iter().map(|a| a.norm_sqr()).sum();
    let err: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    if denom <= 0.0 {
        return f64::NAN;
    }
    if err == 0.0 {
        return MSE_FLOOR_DB;
    }
    (10.0 * (err / denom).log10()).max(MSE_FLOOR_DB)
}

// ── Seed derivation ──────────────────────────────────────────────────────────

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Deterministic seed for a labelled point of the experiment lattice.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut acc = splitmix64(master ^ 0x5cb1_5ca1_b055_1dea);
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

// ── Single run ───────────────────────────────────────────────────────────────

/// One generate -> encode -> corrupt -> decode pipeline description.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub grid: FrequencyGrid,
    pub sparsity_factor: f64,
    pub num_samples: usize,
    pub noise_std: f64,
    pub real_amplitudes: bool,
    pub offgrid: Vec<crate::config::OffGridConfig>,
    pub estimator: EstimatorParams,
    pub flip_prob: f64,
    pub ec: EcParams,
    pub signal_seed: u64,
    pub channel_seed: u64,
}

/// Outcome of one run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_mse_db: f64,
    pub mse_trace: Vec<f64>,
    pub diverged: bool,
    pub wall_time: f64,
}

/// Runs the full pipeline once, computing the per-sample reconstruction MSE
/// without retaining the decoder's state trace.
pub fn run_single(spec: &RunSpec) -> Result<RunResult> {
    let start = std::time::Instant::now();
    let mut sig_spec = SignalSpec::new(
        spec.grid.clone(),
        spec.sparsity_factor,
        spec.num_samples,
        spec.signal_seed,
    );
    sig_spec.noise_std = spec.noise_std;
    sig_spec.real_amplitudes = spec.real_amplitudes;
    sig_spec.offgrid = spec.offgrid.clone();
    let signal = generate(&sig_spec)?;

    let mut encoder = Encoder::new(&spec.grid, spec.estimator)?;
    let mut symbols = Vec::with_capacity(signal.samples.len());
    for &x in &signal.samples {
        let (sign, _) = encoder.step(x)?;
        symbols.push(sign);
    }
    let clean = SignStream::new(symbols);

    let channel = ChannelSpec::new(spec.flip_prob, spec.channel_seed)?;
    let (received, _) = corrupt(&clean, &channel);

    let mut decoder = Decoder::new(&spec.grid, spec.estimator, spec.ec)?;
    let mut mse_trace = Vec::with_capacity(signal.samples.len());
    for (m, &sym) in received.symbols.iter().enumerate() {
        decoder.step(sym)?;
        mse_trace.push(mse_db_slices(
            &signal.true_states[m],
            &decoder.state().amps,
        ));
    }
    let final_mse_db = mse_trace.last().copied().unwrap_or(f64::NAN);
    Ok(RunResult {
        final_mse_db,
        diverged: final_mse_db > DIVERGENCE_DB,
        mse_trace,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

// ── Table sweep ──────────────────────────────────────────────────────────────

/// Aggregated results for one (k, p, ec) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub sparsity_factor: f64,
    pub flip_prob: f64,
    pub ec_enabled: bool,
    pub per_run_mse_db: Vec<f64>,
    pub mean_mse_db: f64,
    pub std_mse_db: f64,
    pub divergent_runs: usize,
}

#[derive(Debug, Clone)]
pub struct TableResult {
    pub cells: Vec<CellResult>,
    pub runs: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn run_spec_for_cell(
    config: &ExperimentConfig,
    grid: &FrequencyGrid,
    k_idx: usize,
    p_idx: usize,
    ec_enabled: bool,
    run: usize,
) -> RunSpec {
    let master = config.master_seed;
    // Signal and channel seeds are shared by the ec on/off variants so the
    // correction is evaluated on identical data.
    let lattice = [k_idx as u64, p_idx as u64, run as u64];
    let signal_seed = derive_seed(master, &[0, lattice[0], lattice[1], lattice[2]]);
    let channel_seed = derive_seed(master, &[1, lattice[0], lattice[1], lattice[2]]);
    let ec_seed = derive_seed(master, &[2, lattice[0], lattice[1], lattice[2]]);
    RunSpec {
        grid: grid.clone(),
        sparsity_factor: config.signal.sparsity_factors[k_idx],
        num_samples: config.signal.num_samples,
        noise_std: config.signal.noise_std,
        real_amplitudes: config.signal.real_amplitudes,
        offgrid: config.signal.offgrid.clone(),
        estimator: config.estimator,
        flip_prob: config.channel.flip_probs[p_idx],
        ec: config.ec.to_params(ec_enabled, ec_seed),
        signal_seed,
        channel_seed,
    }
}

/// Sweeps every (sparsity factor, flip probability, ec on/off) cell of the
/// config, averaging the final MSE over `runs` seeded runs per cell.
/// Divergent runs are counted and included in the means at their actual MSE.
pub fn run_table(config: &ExperimentConfig) -> Result<TableResult> {
    config.validate()?;
    let grid = config.grid.to_grid()?;
    let mut jobs = Vec::new();
    for k_idx in 0..config.signal.sparsity_factors.len() {
        for p_idx in 0..config.channel.flip_probs.len() {
            for ec_enabled in [false, true] {
                for run in 0..config.runs {
                    jobs.push((k_idx, p_idx, ec_enabled, run));
                }
            }
        }
    }
    let results: Vec<(usize, usize, bool, f64)> = jobs
        .par_iter()
        .map(|&(k_idx, p_idx, ec_enabled, run)| {
            let spec = run_spec_for_cell(config, &grid, k_idx, p_idx, ec_enabled, run);
            let out = run_single(&spec)?;
            Ok((k_idx, p_idx, ec_enabled, out.final_mse_db))
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for k_idx in 0..config.signal.sparsity_factors.len() {
        for p_idx in 0..config.channel.flip_probs.len() {
            for ec_enabled in [false, true] {
                let per_run: Vec<f64> = results
                    .iter()
                    .filter(|(k, p, e, _)| *k == k_idx && *p == p_idx && *e == ec_enabled)
                    .map(|(_, _, _, mse)| *mse)
                    .collect();
                let (mean, std) = mean_std(&per_run);
                cells.push(CellResult {
                    sparsity_factor: config.signal.sparsity_factors[k_idx],
                    flip_prob: config.channel.flip_probs[p_idx],
                    ec_enabled,
                    divergent_runs: per_run.iter().filter(|&&m| m > DIVERGENCE_DB).count(),
                    mean_mse_db: mean,
                    std_mse_db: std,
                    per_run_mse_db: per_run,
                });
            }
        }
    }
    Ok(TableResult {
        cells,
        runs: config.runs,
    })
}

impl TableResult {
    /// CSV with one row per cell. Byte-reproducible for a fixed master seed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,p,ec,runs,mean_mse_db,std_mse_db,divergent\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{}\n",
                c.sparsity_factor,
                c.flip_prob,
                if c.ec_enabled { "on" } else { "off" },
                self.runs,
                c.mean_mse_db,
                c.std_mse_db,
                c.divergent_runs
            ));
        }
        out
    }

    pub fn cell(&self, k: f64, p: f64, ec: bool) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.sparsity_factor == k && c.flip_prob == p && c.ec_enabled == ec
        })
    }
}

// ── Off-grid scenario ────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct OffgridResult {
    /// Per-iteration MSE averaged over runs (dB).
    pub mse_trace_db: Vec<f64>,
    pub runs: usize,
    pub divergent_runs: usize,
}

/// Runs the off-grid tracking scenario: the configured off-grid components on
/// top of the usual random on-grid support, error-free channel, averaged
/// per-iteration MSE trace.
pub fn run_offgrid(config: &ExperimentConfig) -> Result<OffgridResult> {
    config.validate()?;
    if config.signal.offgrid.is_empty() {
        return Err(Error::Config(
            "off-grid scenario requires at least one off-grid component".into(),
        ));
    }
    let grid = config.grid.to_grid()?;
    let traces: Vec<RunResult> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let mut spec = run_spec_for_cell(config, &grid, 0, 0, false, run);
            spec.flip_prob = 0.0;
            run_single(&spec)
        })
        .collect::<Result<_>>()?;
    let len = config.signal.num_samples;
    let mut mse_trace_db = vec![0.0; len];
    for t in &traces {
        for (acc, v) in mse_trace_db.iter_mut().zip(&t.mse_trace) {
            *acc += v / config.runs as f64;
        }
    }
    Ok(OffgridResult {
        mse_trace_db,
        runs: config.runs,
        divergent_runs: traces.iter().filter(|t| t.diverged).count(),
    })
}

impl OffgridResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,mse_db\n");
        for (i, v) in self.mse_trace_db.iter().enumerate() {
            out.push_str(&format!("{},{:.6}\n", i, v));
        }
        out
    }

    /// Mean of the first `frac` of the trace.
    pub fn head_mean(&self, frac: f64) -> f64 {
        let n = ((self.mse_trace_db.len() as f64 * frac) as usize).max(1);
        self.mse_trace_db[..n].iter().sum::<f64>() / n as f64
    }

    /// Mean of the last `frac` of the trace.
    pub fn tail_mean(&self, frac: f64) -> f64 {
        let n = ((self.mse_trace_db.len() as f64 * frac) as usize).max(1);
        let start = self.mse_trace_db.len() - n;
        self.mse_trace_db[start..].iter().sum::<f64>() / n as f64
    }
}
