//! The LCSB sign-stream file format.
//!
//! Little-endian layout:
//!
//! ```text
//! magic          "LCSB"                       4 bytes
//! version        u16 = 1
//! n              u32   grid size
//! m              u32   window length
//! tau            f64
//! grid_tag       u8    0 = uniform imaginary grid, 1 = explicit list
//!   tag 0:       omega0 f64, count u32 (= n)
//!   tag 1:       n pairs of (re f64, im f64)
//! lambda1..delta_growth   6 x f64 (lambda1, lambda2, sigma0, delta0,
//!                                  sigma_growth, delta_growth)
//! sample_count   u64
//! payload        2 bits per sample, 4 samples per byte, LSB first;
//!                bit0 = real sign, bit1 = imaginary sign, 1 => +1;
//!                final byte zero-padded
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::estimator::EstimatorParams;
use crate::model::{FrequencyGrid, GridKind, SignSymbol, C64};

pub const MAGIC: &[u8; 4] = b"LCSB";
pub const VERSION: u16 = 1;

/// A sequence of complex sign symbols.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SignStream {
    pub symbols: Vec<SignSymbol>,
}

impl SignStream {
    pub fn new(symbols: Vec<SignSymbol>) -> SignStream {
        SignStream { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Packs the symbols into the 2-bit payload encoding.
    pub fn pack(&self) -> Vec<u8> {
        let mut bytes = vec![0u8; self.symbols.len().div_ceil(4)];
        for (s, sym) in self.symbols.iter().enumerate() {
            let (re_bit, im_bit) = sym.bits();
            let shift = 2 * (s % 4);
            bytes[s / 4] |= re_bit << shift;
            bytes[s / 4] |= im_bit << (shift + 1);
        }
        bytes
    }

    /// Unpacks `count` symbols from a 2-bit payload.
    pub fn unpack(bytes: &[u8], count: usize) -> Result<SignStream> {
        if bytes.len() < count.div_ceil(4) {
            return Err(Error::MalformedStream(format!(
                "payload holds {} bytes, {} samples need {}",
                bytes.len(),
                count,
                count.div_ceil(4)
            )));
        }
        let symbols = (0..count)
            .map(|s| {
                let shift = 2 * (s % 4);
                let b = bytes[s / 4] >> shift;
                SignSymbol::from_bits(b & 1 == 1, b & 2 == 2)
            })
            .collect();
        Ok(SignStream { symbols })
    }
}

/// Everything a receiver needs to reconstruct: grid, window and the estimator
/// schedule parameters used by the transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    pub grid: FrequencyGrid,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma0: f64,
    pub delta0: f64,
    pub sigma_growth: f64,
    pub delta_growth: f64,
    pub sample_count: u64,
}

impl StreamHeader {
    pub fn new(grid: &FrequencyGrid, params: &EstimatorParams, sample_count: u64) -> StreamHeader {
        StreamHeader {
            grid: grid.clone(),
            lambda1: params.lambda1,
            lambda2: params.lambda2,
            sigma0: params.sigma0,
            delta0: params.delta0,
            sigma_growth: params.sigma_growth,
            delta_growth: params.delta_growth,
            sample_count,
        }
    }

    /// Estimator parameters carried by the header; caps and the linearization
    /// switch are not part of the wire format and keep their defaults.
    pub fn estimator_params(&self) -> EstimatorParams {
        EstimatorParams {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            sigma0: self.sigma0,
            delta0: self.delta0,
            sigma_growth: self.sigma_growth,
            delta_growth: self.delta_growth,
            ..EstimatorParams::default()
        }
    }
}

/// Serializes a header and stream. The header's `sample_count` must match the
/// stream length.
pub fn write_stream<W: Write>(w: &mut W, header: &StreamHeader, stream: &SignStream) -> Result<()> {
    if header.sample_count != stream.len() as u64 {
        return Err(Error::DimensionMismatch(format!(
            "header says {} samples, stream holds {}",
            header.sample_count,
            stream.len()
        )));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.grid.n() as u32).to_le_bytes())?;
    w.write_all(&(header.grid.window_len() as u32).to_le_bytes())?;
    w.write_all(&header.grid.tau().to_le_bytes())?;
    match header.grid.kind() {
        GridKind::UniformImaginary { omega0 } => {
            w.write_all(&[0u8])?;
            w.write_all(&omega0.to_le_bytes())?;
            w.write_all(&(header.grid.n() as u32).to_le_bytes())?;
        }
        GridKind::Explicit => {
            w.write_all(&[1u8])?;
            for z in header.grid.exponents() {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    for v in [
        header.lambda1,
        header.lambda2,
        header.sigma0,
        header.delta0,
        header.sigma_growth,
        header.delta_growth,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&header.sample_count.to_le_bytes())?;
    w.write_all(&stream.pack())?;
    Ok(())
}

fn read_exact<R: Read, const K: usize>(r: &mut R, what: &str) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)
        .map_err(|e| Error::MalformedStream(format!("truncated while reading {what}: {e}")))?;
    Ok(buf)
}

fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<R, 8>(r, what)?))
}

/// Parses a serialized stream.
pub fn read_stream<R: Read>(r: &mut R) -> Result<(StreamHeader, SignStream)> {
    let magic = read_exact::<R, 4>(r, "magic")?;
    if &magic != MAGIC {
        return Err(Error::MalformedStream(format!("bad magic {magic:02x?}")));
    }
    let version = u16::from_le_bytes(read_exact::<R, 2>(r, "version")?);
    if version != VERSION {
        return Err(Error::MalformedStream(format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(read_exact::<R, 4>(r, "n")?) as usize;
    let m = u32::from_le_bytes(read_exact::<R, 4>(r, "window length")?) as usize;
    let tau = read_f64(r, "tau")?;
    let tag = read_exact::<R, 1>(r, "grid tag")?[0];
    let grid = match tag {
        0 => {
            let omega0 = read_f64(r, "omega0")?;
            let count = u32::from_le_bytes(read_exact::<R, 4>(r, "grid count")?) as usize;
            if count != n {
                return Err(Error::MalformedStream(format!(
                    "uniform grid count {count} disagrees with n {n}"
                )));
            }
            FrequencyGrid::uniform_imaginary(n, omega0, tau, m)?
        }
        1 => {
            let mut exps = Vec::with_capacity(n);
            for _ in 0..n {
                let re = read_f64(r, "exponent re")?;
                let im = read_f64(r, "exponent im")?;
                exps.push(C64::new(re, im));
            }
            FrequencyGrid::new(exps, tau, m)?
        }
        other => {
            return Err(Error::MalformedStream(format!("unknown grid tag {other}")));
        }
    };
    let lambda1 = read_f64(r, "lambda1")?;
    let lambda2 = read_f64(r, "lambda2")?;
    let sigma0 = read_f64(r, "sigma0")?;
    let delta0 = read_f64(r, "delta0")?;
    let sigma_growth = read_f64(r, "sigma growth")?;
    let delta_growth = read_f64(r, "delta growth")?;
    let sample_count = u64::from_le_bytes(read_exact::<R, 8>(r, "sample count")?);
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)
        .map_err(|e| Error::MalformedStream(format!("payload: {e}")))?;
    let stream = SignStream::unpack(&payload, sample_count as usize)?;
    Ok((
        StreamHeader {
            grid,
            lambda1,
            lambda2,
            sigma0,
            delta0,
            sigma_growth,
            delta_growth,
            sample_count,
        },
        stream,
    ))
}

/// Convenience: serialize to an owned buffer.
pub fn stream_to_bytes(header: &StreamHeader, stream: &SignStream) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_stream(&mut buf, header, stream)?;
    Ok(buf)
}

/// Convenience: parse from a byte slice.
pub fn stream_from_bytes(bytes: &[u8]) -> Result<(StreamHeader, SignStream)> {
    read_stream(&mut std::io::Cursor::new(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(n: usize, count: u64) -> StreamHeader {
        let grid = FrequencyGrid::uniform_imaginary(n, 10.0, 5e-4, 4).unwrap();
        StreamHeader::new(&grid, &EstimatorParams::default(), count)
    }

    fn symbols(bits: &[(bool, bool)]) -> SignStream {
        SignStream::new(
            bits.iter()
                .map(|&(r, i)| SignSymbol::from_bits(r, i))
                .collect(),
        )
    }

    #[test]
    fn four_samples_pack_into_one_byte() {
        let s = symbols(&[(true, true), (false, true), (true, false), (false, false)]);
        let h = header(3, 4);
        let bytes = stream_to_bytes(&h, &s).unwrap();
        let empty = stream_to_bytes(&header(3, 0), &SignStream::default()).unwrap();
        assert_eq!(bytes.len(), empty.len() + 1);
        // bit layout: sample 0 in bits 0..2, LSB first
        let payload = bytes[bytes.len() - 1];
        assert_eq!(payload & 0b11, 0b11);
        assert_eq!((payload >> 2) & 0b11, 0b10);
        assert_eq!((payload >> 4) & 0b11, 0b01);
        assert_eq!((payload >> 6) & 0b11, 0b00);
    }

    #[test]
    fn empty_stream_is_header_only() {
        let h = header(2, 0);
        let bytes = stream_to_bytes(&h, &SignStream::default()).unwrap();
        let (h2, s2) = stream_from_bytes(&bytes).unwrap();
        assert_eq!(h2.sample_count, 0);
        assert!(s2.is_empty());
        assert_eq!(h2.grid.n(), 2);
    }

    #[test]
    fn explicit_grid_round_trips() {
        let grid = FrequencyGrid::new(vec![C64::new(-0.5, 3.0), C64::new(0.0, 8.0)], 1e-3, 6).unwrap();
        let h = StreamHeader::new(&grid, &EstimatorParams::default(), 3);
        let s = symbols(&[(true, false), (false, false), (true, true)]);
        let bytes = stream_to_bytes(&h, &s).unwrap();
        let (h2, s2) = stream_from_bytes(&bytes).unwrap();
        assert_eq!(h2.grid.exponents(), grid.exponents());
        assert_eq!(s2, s);
    }

    #[test]
    fn header_count_mismatch_is_rejected() {
        let h = header(2, 5);
        let s = symbols(&[(true, true)]);
        assert!(stream_to_bytes(&h, &s).is_err());
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let h = header(2, 1);
        let s = symbols(&[(true, true)]);
        let mut bytes = stream_to_bytes(&h, &s).unwrap();
        bytes[0] = b'X';
        assert!(stream_from_bytes(&bytes).is_err());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let h = header(2, 9);
        let s = symbols(&[(true, true); 9]);
        let mut bytes = stream_to_bytes(&h, &s).unwrap();
        bytes.truncate(bytes.len() - 1);
        assert!(stream_from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_any_stream(bits in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..600)) {
            let s = symbols(&bits);
            let h = header(2, bits.len() as u64);
            let bytes = stream_to_bytes(&h, &s).unwrap();
            let (h2, s2) = stream_from_bytes(&bytes).unwrap();
            prop_assert_eq!(s2, s);
            prop_assert_eq!(h2.sample_count as usize, bits.len());
        }
    }
}
