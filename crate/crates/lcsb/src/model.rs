//! Signal model primitives shared by every stage of the pipeline: the
//! frequency grid, the Vandermonde window operator, the one-step predictor,
//! complex sign symbols and the sliding measurement window.
//!
//! The model represents a spectrum-sparse signal as a sum of complex
//! exponential components `s_z(t)` over a fixed candidate grid
//! `Z = {z_1, ..., z_N}` with `s_z(t + e) = exp(z e) s_z(t)`. On the uniform
//! sample lattice `t = m tau` the component values form the state vector
//! `S_m`, a window of `M` consecutive samples is `X_m = Phi S_m`, and the
//! state advances by `S_m = P (*) S_{m-1}` element-wise.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Double-precision complex number used throughout the crate.
pub type C64 = Complex64;

// ── Sign symbols ─────────────────────────────────────────────────────────────

/// Sign of one real axis, with `sign(0) = +1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// Sign of a finite real value; zero maps to `Plus`.
    pub fn of(x: f64) -> Sign {
        if x >= 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// One complex sign measurement `b = csgn(v)`, an element of `{±1 ± 1j}`.
///
/// Only the four valid symbols are representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignSymbol {
    pub re: Sign,
    pub im: Sign,
}

impl SignSymbol {
    pub fn new(re: Sign, im: Sign) -> SignSymbol {
        SignSymbol { re, im }
    }

    /// The symbol as a complex number in `{±1 ± 1j}`.
    pub fn value(self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }

    /// Packs to `(re_bit, im_bit)` with `1 => +1`, `0 => -1`.
    pub fn bits(self) -> (u8, u8) {
        (
            (self.re == Sign::Plus) as u8,
            (self.im == Sign::Plus) as u8,
        )
    }

    pub fn from_bits(re_bit: bool, im_bit: bool) -> SignSymbol {
        SignSymbol {
            re: if re_bit { Sign::Plus } else { Sign::Minus },
            im: if im_bit { Sign::Plus } else { Sign::Minus },
        }
    }
}

/// Complex sign `csgn(v) = sgn(Re v) + j sgn(Im v)` with `sgn(x) = +1` for
/// `x >= 0` and `-1` otherwise.
pub fn csgn(v: C64) -> Result<SignSymbol> {
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::NonFinite(format!("csgn argument {v}")));
    }
    Ok(SignSymbol::new(Sign::of(v.re), Sign::of(v.im)))
}

// ── Frequency grid ───────────────────────────────────────────────────────────

/// How the exponent set was constructed; preserved so streams can be
/// serialized compactly for the common uniform case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridKind {
    /// `z_i = j * i * omega0` for `i = 1..=n`.
    UniformImaginary { omega0: f64 },
    /// Arbitrary exponent list.
    Explicit,
}

/// The candidate exponent set `Z`, the sampling period `tau` and the window
/// length `M`. Together these determine the Vandermonde operator and the
/// one-step predictor.
///
/// Constructed only through the validating constructors; (de)serialization
/// goes through the config-level grid description instead.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    exponents: Vec<C64>,
    tau: f64,
    window_len: usize,
    kind: GridKind,
}

impl FrequencyGrid {
    /// Builds a grid from an explicit exponent list.
    ///
    /// Requires at least one exponent, `tau > 0`, `window_len >= 1`, distinct
    /// exponents and `Re(z_i) <= 0` (no growing components).
    pub fn new(exponents: Vec<C64>, tau: f64, window_len: usize) -> Result<FrequencyGrid> {
        Self::with_kind(exponents, tau, window_len, GridKind::Explicit)
    }

    /// Builds the uniform purely-imaginary grid `Z = {j omega0, ..., j n omega0}`.
    pub fn uniform_imaginary(
        n: usize,
        omega0: f64,
        tau: f64,
        window_len: usize,
    ) -> Result<FrequencyGrid> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidGrid(format!("omega0 must be positive, got {omega0}")));
        }
        let exponents = (1..=n)
            .map(|i| C64::new(0.0, i as f64 * omega0))
            .collect();
        Self::with_kind(exponents, tau, window_len, GridKind::UniformImaginary { omega0 })
    }

    fn with_kind(
        exponents: Vec<C64>,
        tau: f64,
        window_len: usize,
        kind: GridKind,
    ) -> Result<FrequencyGrid> {
        if exponents.is_empty() {
            return Err(Error::InvalidGrid("grid must contain at least one exponent".into()));
        }
        if window_len < 1 {
            return Err(Error::InvalidGrid("window length must be at least 1".into()));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidGrid(format!("tau must be positive, got {tau}")));
        }
        for (i, z) in exponents.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::InvalidGrid(format!("exponent {i} is not finite")));
            }
            if z.re > 0.0 {
                return Err(Error::InvalidGrid(format!(
                    "exponent {i} has positive real part {}; growing components are not allowed",
                    z.re
                )));
            }
        }
        // Distinctness keeps the Vandermonde columns independent.
        let mut sorted: Vec<(u64, u64)> = exponents
            .iter()
            .map(|z| (z.re.to_bits(), z.im.to_bits()))
            .collect();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidGrid("exponents must be distinct".into()));
        }
        Ok(FrequencyGrid {
            exponents,
            tau,
            window_len,
            kind,
        })
    }

    pub fn n(&self) -> usize {
        self.exponents.len()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn exponents(&self) -> &[C64] {
        &self.exponents
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// The one-step predictor `P` with `[P]_i = exp(z_i tau)`.
    pub fn predictor(&self) -> PredictorVector {
        PredictorVector {
            p: self
                .exponents
                .iter()
                .map(|z| (z * self.tau).exp())
                .collect(),
        }
    }
}

// ── Spectral state ───────────────────────────────────────────────────────────

/// Component values at one sample instant: `[S_m]_i = s_{z_i}(m tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub amps: Vec<C64>,
    pub time_index: i64,
}

impl SpectralState {
    pub fn zero(n: usize, time_index: i64) -> SpectralState {
        SpectralState {
            amps: vec![C64::new(0.0, 0.0); n],
            time_index,
        }
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// One-step predictor vector `[P]_i = exp(z_i tau)`; `|[P]_i| <= 1` under the
/// grid invariant `Re(z_i) <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorVector {
    p: Vec<C64>,
}

impl PredictorVector {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.p
    }
}

/// `S_{m+1} = P (*) S_m`, element-wise; the time index advances by one.
pub fn predict_state(state: &SpectralState, p: &PredictorVector) -> Result<SpectralState> {
    if state.len() != p.len() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} entries, predictor has {}",
            state.len(),
            p.len()
        )));
    }
    Ok(SpectralState {
        amps: state
            .amps
            .iter()
            .zip(&p.p)
            .map(|(s, pi)| s * pi)
            .collect(),
        time_index: state.time_index + 1,
    })
}

/// Next comparison level `l((m+1) tau) = sum_i [P (*) S_m]_i`.
///
/// Exactly the sum of the entries of [`predict_state`], in index order, so the
/// two operations agree bit for bit.
pub fn predict_level(state: &SpectralState, p: &PredictorVector) -> Result<C64> {
    let predicted = predict_state(state, p)?;
    Ok(predicted.amps.iter().sum())
}

// ── Vandermonde operator ─────────────────────────────────────────────────────

/// The `M x N` window operator with entries `[Phi]_{k,i} = exp(-z_i k tau)`,
/// mapping a state at time `m` to the window `[x(m tau), ..., x((m-M+1) tau)]`
/// (newest first). Row `k = 0` is all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Vandermonde {
    rows: usize,
    cols: usize,
    data: Vec<C64>, // row-major
}

/// Builds the Vandermonde operator for a grid.
pub fn build_vandermonde(grid: &FrequencyGrid) -> Vandermonde {
    let rows = grid.window_len();
    let cols = grid.n();
    let mut data = Vec::with_capacity(rows * cols);
    for k in 0..rows {
        let t = k as f64 * grid.tau();
        for z in grid.exponents() {
            data.push((-z * t).exp());
        }
    }
    Vandermonde { rows, cols, data }
}

impl Vandermonde {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, k: usize, i: usize) -> C64 {
        self.data[k * self.cols + i]
    }

    pub fn row(&self, k: usize) -> &[C64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    /// `Phi[..w] * s`: the first `w` rows applied to a state vector.
    pub fn apply_truncated(&self, s: &[C64], w: usize) -> Vec<C64> {
        assert!(w <= self.rows);
        assert_eq!(s.len(), self.cols);
        (0..w)
            .map(|k| {
                self.row(k)
                    .iter()
                    .zip(s)
                    .map(|(a, b)| a * b)
                    .sum::<C64>()
            })
            .collect()
    }

    /// `Phi[..w]^H * v`: conjugate-transpose of the first `w` rows applied to
    /// a window vector of length `w`.
    pub fn adjoint_truncated(&self, v: &[C64], w: usize) -> Vec<C64> {
        assert!(w <= self.rows);
        assert_eq!(v.len(), w);
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for k in 0..w {
            let vk = v[k];
            for (o, a) in out.iter_mut().zip(self.row(k)) {
                *o += a.conj() * vk;
            }
        }
        out
    }
}

// ── Sliding measurement window ───────────────────────────────────────────────

/// The sliding window of sign measurements and the levels they were compared
/// against, newest first: index 0 holds sample `m`, index 1 sample `m-1`, ...
///
/// Holds at most `M` entries; pushing a new sample drops the oldest once full.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    signs: VecDeque<SignSymbol>,
    levels: VecDeque<C64>,
    capacity: usize,
}

impl SlidingWindow {
    pub fn new(capacity: usize) -> SlidingWindow {
        SlidingWindow {
            signs: VecDeque::with_capacity(capacity + 1),
            levels: VecDeque::with_capacity(capacity + 1),
            capacity,
        }
    }

    pub fn push(&mut self, sign: SignSymbol, level: C64) {
        self.signs.push_front(sign);
        self.levels.push_front(level);
        if self.signs.len() > self.capacity {
            self.signs.pop_back();
            self.levels.pop_back();
        }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.signs.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Signs, newest first.
    pub fn signs(&self) -> Vec<SignSymbol> {
        self.signs.iter().copied().collect()
    }

    /// Levels, newest first.
    pub fn levels(&self) -> Vec<C64> {
        self.levels.iter().copied().collect()
    }
}
