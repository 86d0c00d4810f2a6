//! Memoryless bit-flip channel. Real and imaginary sign bits flip
//! independently, each with probability `p`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::SignSymbol;
use crate::stream::SignStream;

/// Channel description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    /// Flip probability per transmitted bit, in `[0, 0.5]`.
    pub p: f64,
    pub seed: u64,
}

impl ChannelSpec {
    pub fn new(p: f64, seed: u64) -> Result<ChannelSpec> {
        if !(p.is_finite() && (0.0..=0.5).contains(&p)) {
            return Err(Error::InvalidParam(format!(
                "flip probability {p} outside [0, 0.5]"
            )));
        }
        Ok(ChannelSpec { p, seed })
    }
}

/// Ground-truth flip indicators for one symbol: `(e_r, e_i)` with
/// `Re(b) = Re(b_hat) (1 - 2 e_r)` and likewise on the imaginary axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlipPair {
    pub re: bool,
    pub im: bool,
}

/// Applies the channel, returning the corrupted stream and the true flip
/// indicators. Deterministic for a fixed seed.
pub fn corrupt(stream: &SignStream, spec: &ChannelSpec) -> (SignStream, Vec<FlipPair>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(stream.len());
    let mut flips = Vec::with_capacity(stream.len());
    for sym in &stream.symbols {
        let flip_re = spec.p > 0.0 && rng.random::<f64>() < spec.p;
        let flip_im = spec.p > 0.0 && rng.random::<f64>() < spec.p;
        let corrupted = SignSymbol {
            re: if flip_re { sym.re.flipped() } else { sym.re },
            im: if flip_im { sym.im.flipped() } else { sym.im },
        };
        out.push(corrupted);
        flips.push(FlipPair {
            re: flip_re,
            im: flip_im,
        });
    }
    (SignStream::new(out), flips)
}
