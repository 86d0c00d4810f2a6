//! Per-sample sparse spectral estimation from sign measurements.
//!
//! Each incoming sample contributes one complex sign bit compared against a
//! predicted level. The estimator keeps a sliding window of those
//! measurements and performs one surrogate-cost minimization step per sample:
//!
//! * the sign function is smoothed by `f_delta(s) = (2/pi) arctan(delta s)`,
//! * sparsity is promoted by `g_sigma(s) = arctan(sigma |s|) / arctan(sigma)`,
//! * the data/smoothness gradient is linearized at the previous estimate,
//!   giving a per-element driver vector `Y`,
//! * each component magnitude solves a real cubic in closed form while the
//!   phase is inherited from `Y`,
//! * `sigma` and `delta` sharpen geometrically from sample to sample, so the
//!   surrogates anneal from convex (l1-like, soft signs) toward the exact
//!   l0 norm and hard signs.

mod cubic;

pub use cubic::{
    eval_cubic, smallest_nonneg_root, solve_magnitude, solve_magnitude_with_condition,
    Case2Condition, MagnitudeSolve,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    build_vandermonde, predict_level, predict_state, FrequencyGrid, PredictorVector, SignSymbol,
    SlidingWindow, SpectralState, Vandermonde, C64,
};

// ── Surrogate functions ──────────────────────────────────────────────────────

/// Smoothed-l0 surrogate `arctan(sigma s) / arctan(sigma)` for `s >= 0`.
///
/// Interpolates between the l1 norm (`sigma -> 0`) and the l0 norm
/// (`sigma -> inf`).
pub fn g_sigma(s: f64, sigma: f64) -> f64 {
    debug_assert!(s >= 0.0);
    (sigma * s).atan() / sigma.atan()
}

/// Differentiable sign surrogate `(2/pi) arctan(delta s)`.
pub fn f_delta(s: f64, delta: f64) -> f64 {
    std::f64::consts::FRAC_2_PI * (delta * s).atan()
}

/// Derivative of [`f_delta`]: `(2/pi) delta / (1 + delta^2 s^2)`.
pub fn f_delta_prime(s: f64, delta: f64) -> f64 {
    std::f64::consts::FRAC_2_PI * delta / (1.0 + delta * delta * s * s)
}

/// Complex lift `cf(v) = f(Re v) + j f(Im v)`.
pub fn cf(v: C64, delta: f64) -> C64 {
    C64::new(f_delta(v.re, delta), f_delta(v.im, delta))
}

/// Axis-paired residual weight used by the data-term gradient:
/// `f'(Re u) (f(Re u) - Re b) + j f'(Im u) (f(Im u) - Im b)`.
///
/// This is the true gradient pairing of the squared error split into real and
/// imaginary parts, not a full complex product.
pub fn data_weight(u: C64, b: C64, delta: f64) -> C64 {
    C64::new(
        f_delta_prime(u.re, delta) * (f_delta(u.re, delta) - b.re),
        f_delta_prime(u.im, delta) * (f_delta(u.im, delta) - b.im),
    )
}

// ── Parameters ───────────────────────────────────────────────────────────────

/// Tuning knobs of the estimator. The growth factors come from the reference
/// schedules (`sigma` x1.1 and `delta` x1.01 per sample); weights, initial
/// values and caps are free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorParams {
    /// Smooth-update weight on `||S - P (*) S_prev||^2`.
    pub lambda1: f64,
    /// Sparsity weight.
    pub lambda2: f64,
    /// Initial l0-surrogate sharpness.
    pub sigma0: f64,
    /// Per-sample growth of `sigma` (> 1).
    pub sigma_growth: f64,
    /// Upper bound for `sigma`.
    pub sigma_cap: f64,
    /// Initial sign-surrogate sharpness.
    pub delta0: f64,
    /// Per-sample growth of `delta` (> 1).
    pub delta_growth: f64,
    /// Upper bound for `delta`.
    pub delta_cap: f64,
    /// Evaluate the data gradient at `P (*) S_prev` instead of `S_prev`.
    /// Off by default: the linearization point is the prior estimate as
    /// written, and the propagated point is an opt-in variant.
    pub propagate_first: bool,
}

/// Tuned for the desk profile (N = 100, M = 50, uniform grid spanning
/// 0..2.5 rad/sample). The smooth-update weight carries the stability
/// scaling of the linearized per-element solve, which grows with N * M;
/// the caps keep both surrogates in their informative band instead of
/// freezing the loop.
impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            lambda1: 13600.0,
            lambda2: 28.0,
            sigma0: 1.0,
            sigma_growth: 1.1,
            sigma_cap: 7.5,
            delta0: 0.32,
            delta_growth: 1.01,
            delta_cap: 2.8,
            propagate_first: false,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("sigma0", self.sigma0),
            ("delta0", self.delta0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("sigma_growth", self.sigma_growth), ("delta_growth", self.delta_growth)] {
            if !(v.is_finite() && v > 1.0) {
                return Err(Error::InvalidParam(format!("{name} must exceed 1, got {v}")));
            }
        }
        if self.sigma_cap < self.sigma0 {
            return Err(Error::InvalidParam("sigma_cap below sigma0".into()));
        }
        if self.delta_cap < self.delta0 {
            return Err(Error::InvalidParam("delta_cap below delta0".into()));
        }
        Ok(())
    }
}

// ── Estimator ────────────────────────────────────────────────────────────────

/// Sliding-window estimator state: prior estimate, surrogate sharpness,
/// the measurement window and the grid operators.
#[derive(Debug, Clone)]
pub struct Estimator {
    params: EstimatorParams,
    phi: Vandermonde,
    predictor: PredictorVector,
    window: SlidingWindow,
    s_hat: SpectralState,
    sigma: f64,
    delta: f64,
}

impl Estimator {
    pub fn new(grid: &FrequencyGrid, params: EstimatorParams) -> Result<Estimator> {
        params.validate()?;
        Ok(Estimator {
            phi: build_vandermonde(grid),
            predictor: grid.predictor(),
            window: SlidingWindow::new(grid.window_len()),
            s_hat: SpectralState::zero(grid.n(), -1),
            sigma: params.sigma0,
            delta: params.delta0,
            params,
        })
    }

    pub fn params(&self) -> &EstimatorParams {
        &self.params
    }

    pub fn state(&self) -> &SpectralState {
        &self.s_hat
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn window(&self) -> &SlidingWindow {
        &self.window
    }

    pub fn phi(&self) -> &Vandermonde {
        &self.phi
    }

    pub fn predictor(&self) -> &PredictorVector {
        &self.predictor
    }

    /// Pushes one sign measurement and the level it was compared against.
    pub fn push_measurement(&mut self, sign: SignSymbol, level: C64) {
        self.window.push(sign, level);
    }

    /// Next comparison level from the current estimate.
    pub fn predict_next_level(&self) -> C64 {
        predict_level(&self.s_hat, &self.predictor).expect("state and predictor lengths agree")
    }

    /// Driver vector `Y = 2 l1 (P (*) S_prev) - 2 Phi^H [cf'(U) (x) (cf(U) - B)]`
    /// with `U = Phi S_prev - L` over the current (possibly partial) window.
    ///
    /// `corrected_signs` is the window sign vector after any error
    /// correction, newest first, as complex values with `Re, Im in {+1, -1}`.
    pub fn compute_y(&self, corrected_signs: &[C64]) -> Result<Vec<C64>> {
        let w = self.window.len();
        if corrected_signs.len() != w {
            return Err(Error::DimensionMismatch(format!(
                "window holds {w} samples but {} corrected signs were supplied",
                corrected_signs.len()
            )));
        }
        let propagated = predict_state(&self.s_hat, &self.predictor)?;
        let lin_point = if self.params.propagate_first {
            &propagated.amps
        } else {
            &self.s_hat.amps
        };
        let levels = self.window.levels();
        let mut u = self.phi.apply_truncated(lin_point, w);
        for (uk, lk) in u.iter_mut().zip(&levels) {
            *uk -= lk;
        }
        let weights: Vec<C64> = u
            .iter()
            .zip(corrected_signs)
            .map(|(&uk, &bk)| data_weight(uk, bk, self.delta))
            .collect();
        let grad = self.phi.adjoint_truncated(&weights, w);
        Ok(propagated
            .amps
            .iter()
            .zip(&grad)
            .map(|(pk, gk)| 2.0 * self.params.lambda1 * pk - 2.0 * gk)
            .collect())
    }

    /// One estimation step for the sample most recently pushed: computes the
    /// driver `Y`, solves the cubic magnitude equation per element (with any
    /// Case-2 sigma escalation), inherits phases from `Y`, then advances the
    /// sigma/delta schedules.
    pub fn update(&mut self, corrected_signs: &[C64]) -> Result<()> {
        let y = self.compute_y(corrected_signs)?;
        let mut sigma = self.sigma;
        let mut amps = Vec::with_capacity(y.len());
        for (i, yi) in y.iter().enumerate() {
            let alpha = yi.norm();
            if !alpha.is_finite() {
                return Err(Error::NonFinite(format!("driver component {i} is {yi}")));
            }
            if alpha == 0.0 {
                amps.push(C64::new(0.0, 0.0));
                continue;
            }
            let solved = solve_magnitude(
                alpha,
                self.params.lambda1,
                self.params.lambda2,
                sigma,
                self.params.sigma_growth,
                self.params.sigma_cap,
            );
            sigma = solved.sigma;
            if solved.r == 0.0 {
                amps.push(C64::new(0.0, 0.0));
            } else {
                // phase of Y, magnitude from the cubic
                amps.push(yi * (solved.r / alpha));
            }
        }
        let next = SpectralState {
            amps,
            time_index: self.s_hat.time_index + 1,
        };
        if !next.is_finite() {
            return Err(Error::NonFinite("estimate left the finite range".into()));
        }
        self.s_hat = next;
        self.sigma = (sigma * self.params.sigma_growth).min(self.params.sigma_cap);
        self.delta = (self.delta * self.params.delta_growth).min(self.params.delta_cap);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::csgn;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    // --- surrogates ---

    #[test]
    fn g_sigma_endpoints() {
        for sigma in [0.3, 1.0, 17.0, 4096.0] {
            assert_eq!(g_sigma(0.0, sigma), 0.0);
            assert!((g_sigma(1.0, sigma) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn g_sigma_approaches_l0_indicator() {
        // arctan(50)/arctan(1000): already within 0.03 of the l0 value 1
        let v = g_sigma(0.05, 1000.0);
        assert!(v < 1.0);
        assert!(1.0 - v < 0.03, "got {v}");
    }

    #[test]
    fn f_delta_origin_values() {
        for delta in [0.5, 1.0, 11.0] {
            assert_eq!(f_delta(0.0, delta), 0.0);
            let expect = std::f64::consts::FRAC_2_PI * delta;
            assert!((f_delta_prime(0.0, delta) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn f_delta_saturates_for_large_delta() {
        // (2/pi) arctan(64) >= 0.99
        let v = f_delta(0.1, 640.0);
        assert!(v < 1.0);
        assert!(1.0 - v < 0.01, "got {v}");
    }

    #[test]
    fn f_delta_prime_matches_finite_differences() {
        let h = 1e-6;
        for &delta in &[1.0, 10.0] {
            for &s in &[-1.0, 0.3, 2.0] {
                let fd = (f_delta(s + h, delta) - f_delta(s - h, delta)) / (2.0 * h);
                let an = f_delta_prime(s, delta);
                assert!((fd - an).abs() < 1e-6, "s={s} delta={delta}: {fd} vs {an}");
            }
        }
    }

    // --- params ---

    #[test]
    fn params_validation() {
        assert!(EstimatorParams::default().validate().is_ok());
        let mut p = EstimatorParams::default();
        p.lambda1 = 0.0;
        assert!(p.validate().is_err());
        let mut p = EstimatorParams::default();
        p.sigma_growth = 1.0;
        assert!(p.validate().is_err());
        let mut p = EstimatorParams::default();
        p.delta_cap = 0.1 * p.delta0;
        assert!(p.validate().is_err());
    }

    // --- compute_y ---

    fn tiny_grid() -> FrequencyGrid {
        FrequencyGrid::new(vec![c(0.0, 100.0), c(-2.0, 350.0)], 1e-3, 3).unwrap()
    }

    fn fill_window(est: &mut Estimator, signs: &[SignSymbol], levels: &[C64]) {
        for (s, l) in signs.iter().zip(levels) {
            // window is newest-first, so push oldest first
            est.push_measurement(*s, *l);
        }
    }

    #[test]
    fn compute_y_matches_direct_evaluation() {
        // zero prior state, zero levels, all signs +1+1j, N=2, M=3:
        // direct evaluation of the formula
        let grid = tiny_grid();
        let mut est = Estimator::new(&grid, EstimatorParams::default()).unwrap();
        let plus = csgn(c(1.0, 1.0)).unwrap();
        fill_window(
            &mut est,
            &[plus, plus, plus],
            &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        );
        let corrected: Vec<C64> = vec![c(1.0, 1.0); 3];
        let y = est.compute_y(&corrected).unwrap();

        // independent direct computation: U = 0, so the weight is
        // f'(0)(f(0) - 1) on each axis = -(2 delta / pi) per axis.
        let delta = est.delta();
        let w0 = -std::f64::consts::FRAC_2_PI * delta;
        let phi = est.phi();
        for i in 0..2 {
            let mut expect = c(0.0, 0.0);
            for k in 0..3 {
                expect += phi.entry(k, i).conj() * c(w0, w0);
            }
            expect *= -2.0;
            assert!(
                (y[i] - expect).norm() < 1e-12 * expect.norm().max(1.0),
                "component {i}: {} vs {expect}",
                y[i]
            );
        }
    }

    #[test]
    fn compute_y_saturating_limit_leaves_smooth_term() {
        // When Phi S - L is deep in saturation and matches the signs, the
        // data term vanishes and Y -> 2 lambda1 P (*) S.
        let grid = tiny_grid();
        let mut params = EstimatorParams::default();
        params.delta0 = 1e7;
        params.delta_cap = 1e7;
        let mut est = Estimator::new(&grid, params).unwrap();
        est.s_hat = SpectralState {
            amps: vec![c(3.0, 1.0), c(-1.0, 2.0)],
            time_index: 0,
        };
        // levels far below Phi S so U is large and positive on both axes
        let w = 3;
        let u = est.phi.apply_truncated(&est.s_hat.amps, w);
        let levels: Vec<C64> = u.iter().map(|v| v - c(50.0, 50.0)).collect();
        let signs: Vec<SignSymbol> = (0..w).map(|_| csgn(c(1.0, 1.0)).unwrap()).collect();
        fill_window(&mut est, &signs, &levels);
        let corrected: Vec<C64> = vec![c(1.0, 1.0); w];
        let y = est.compute_y(&corrected).unwrap();
        let prop = predict_state(&est.s_hat, est.predictor()).unwrap();
        for i in 0..2 {
            let expect = 2.0 * est.params.lambda1 * prop.amps[i];
            assert!(
                (y[i] - expect).norm() < 1e-4 * expect.norm(),
                "component {i}: {} vs {expect}",
                y[i]
            );
        }
    }

    #[test]
    fn compute_y_pure_data_term_when_state_zero_lambda_irrelevant() {
        // S_prev = 0 removes the smooth term regardless of lambda1.
        let grid = tiny_grid();
        let mut est = Estimator::new(&grid, EstimatorParams::default()).unwrap();
        let minus = csgn(c(-1.0, -1.0)).unwrap();
        fill_window(&mut est, &[minus, minus], &[c(0.1, 0.0), c(-0.2, 0.3)]);
        let corrected: Vec<C64> = vec![c(-1.0, -1.0); 2];
        let y = est.compute_y(&corrected).unwrap();

        let delta = est.delta();
        let levels = est.window.levels();
        let phi = est.phi();
        for i in 0..2 {
            let mut expect = c(0.0, 0.0);
            for k in 0..2 {
                let u = -levels[k];
                expect += phi.entry(k, i).conj() * data_weight(u, c(-1.0, -1.0), delta);
            }
            expect *= -2.0;
            assert!((y[i] - expect).norm() < 1e-12 * expect.norm().max(1.0));
        }
    }

    #[test]
    fn compute_y_rejects_wrong_sign_count() {
        let grid = tiny_grid();
        let mut est = Estimator::new(&grid, EstimatorParams::default()).unwrap();
        est.push_measurement(csgn(c(1.0, 1.0)).unwrap(), c(0.0, 0.0));
        assert!(est.compute_y(&[c(1.0, 1.0), c(1.0, 1.0)]).is_err());
    }

    // --- update ---

    #[test]
    fn update_keeps_zero_state_on_zero_driver() {
        // A grid with symmetric signs that cancel cannot be arranged easily;
        // instead check the documented alpha = 0 path via a zero window: no
        // measurements means no update, so use one measurement with levels
        // arranged so Y = 0 is impossible; the zero-driver path is covered by
        // solve_magnitude directly. Here: phase preservation.
        let grid = tiny_grid();
        let mut est = Estimator::new(&grid, EstimatorParams::default()).unwrap();
        est.push_measurement(csgn(c(1.0, -1.0)).unwrap(), c(0.0, 0.0));
        let corrected = vec![c(1.0, -1.0)];
        let y = est.compute_y(&corrected).unwrap();
        est.update(&corrected).unwrap();
        for i in 0..2 {
            let s = est.state().amps[i];
            if s.norm() > 0.0 {
                let phase_s = s / s.norm();
                let phase_y = y[i] / y[i].norm();
                assert!(
                    (phase_s - phase_y).norm() < 1e-12,
                    "phase mismatch on {i}: {phase_s} vs {phase_y}"
                );
            }
        }
        assert_eq!(est.state().time_index, 0);
    }

    #[test]
    fn schedules_are_non_decreasing_and_capped() {
        let grid = tiny_grid();
        let mut params = EstimatorParams::default();
        params.sigma_cap = 5.0;
        params.delta_cap = 1.2;
        let mut est = Estimator::new(&grid, params).unwrap();
        let mut last_sigma = est.sigma();
        let mut last_delta = est.delta();
        for m in 0..60 {
            let level = est.predict_next_level();
            let sample = c((m as f64 * 0.37).sin(), (m as f64 * 0.11).cos());
            let sign = csgn(sample - level).unwrap();
            est.push_measurement(sign, level);
            let corrected: Vec<C64> = est.window().signs().iter().map(|s| s.value()).collect();
            est.update(&corrected).unwrap();
            assert!(est.sigma() >= last_sigma);
            assert!(est.delta() >= last_delta);
            assert!(est.sigma() <= 5.0 + 1e-12);
            assert!(est.delta() <= 1.2 + 1e-12);
            assert!(est.state().is_finite());
            last_sigma = est.sigma();
            last_delta = est.delta();
        }
    }

    #[test]
    fn small_instance_converges_on_grid() {
        // N = 20, M = 10, two active components, noiseless feedback loop:
        // the estimate should land at or below -15 dB after 2000 samples.
        // Weights follow the small-instance tuning recorded in the bench
        // profiles; the grid spans the same band as the larger profiles.
        let n = 20;
        let grid = FrequencyGrid::uniform_imaginary(n, 250.0, 5e-4, 10).unwrap();
        let p = grid.predictor();
        let params = EstimatorParams {
            lambda1: 2850.0,
            lambda2: 12.0,
            delta0: 0.12,
            delta_cap: 1.7,
            sigma_cap: 2.1,
            ..EstimatorParams::default()
        };
        let mut est = Estimator::new(&grid, params).unwrap();

        let mut truth = SpectralState::zero(n, 0);
        truth.amps[3] = c(0.9, -0.4);
        truth.amps[14] = c(-0.7, 0.6);

        let mut mse_db = 0.0;
        for _ in 0..2000 {
            let x: C64 = truth.amps.iter().sum();
            let level = est.predict_next_level();
            let sign = csgn(x - level).unwrap();
            est.push_measurement(sign, level);
            let corrected: Vec<C64> = est.window().signs().iter().map(|s| s.value()).collect();
            est.update(&corrected).unwrap();

            let err: f64 = est
                .state()
                .amps
                .iter()
                .zip(&truth.amps)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            mse_db = 10.0 * (err / truth.norm_sq()).log10();
            truth = predict_state(&truth, &p).unwrap();
        }
        assert!(mse_db <= -15.0, "final MSE {mse_db} dB");
    }
}
