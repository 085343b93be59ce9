//! Binary weights file:
//!
//! ```text
//! "SRCW" | version: u8 = 1
//! per layer: kh, kw, in_ch, out_ch (u32 LE)
//!            kernel (f64 LE, (out_ch, in_ch, kh, kw) order)
//!            bias   (f64 LE, out_ch values)
//! crc32 (IEEE) of all preceding bytes, u32 LE
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Architecture, ConvLayer, SrcnnWeights};
use crate::error::{Error, FormatError, Result};
use crate::imgcore::io::write_atomic;
use crate::imgcore::ConvKernel;

const MAGIC: &[u8; 4] = b"SRCW";
const VERSION: u8 = 1;

pub fn encode_weights(w: &SrcnnWeights) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + w.num_params() * 8 + 48);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    for layer in w.layers() {
        for d in layer.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in layer.kernel.data.iter().chain(&layer.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        if self.bytes.len() - self.pos < n {
            return Err(FormatError::Truncated(what));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>, FormatError> {
        let len = n.checked_mul(8).ok_or(FormatError::Truncated(what))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Parses a weights file. With `expected`, layer dims must match it exactly.
pub fn decode_weights(bytes: &[u8], expected: Option<Architecture>) -> Result<SrcnnWeights> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(FormatError::BadMagic.into());
    }
    let version = r.take(1, "version")?[0];
    if version != VERSION {
        return Err(FormatError::BadVersion(version).into());
    }

    let mut raw = Vec::with_capacity(3);
    for _ in 0..3 {
        let dims = [r.u32("layer dims")?, r.u32("layer dims")?, r.u32("layer dims")?, r.u32("layer dims")?]
            .map(|d| d as usize);
        let [kh, kw, in_ch, out_ch] = dims;
        let n = kh
            .checked_mul(kw)
            .and_then(|v| v.checked_mul(in_ch))
            .and_then(|v| v.checked_mul(out_ch))
            .ok_or(FormatError::Truncated("kernel values"))?;
        let kernel = r.f64s(n, "kernel values")?;
        let bias = r.f64s(out_ch, "bias values")?;
        raw.push((dims, kernel, bias));
    }
    let body_end = r.pos;
    let stored = r.u32("checksum")?;
    if r.pos != bytes.len() {
        return Err(FormatError::TrailingBytes(bytes.len() - r.pos).into());
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed }.into());
    }

    if let Some(arch) = expected {
        for (i, ((dims, _, _), want)) in raw.iter().zip(arch.layer_dims()).enumerate() {
            if *dims != want {
                return Err(FormatError::DimMismatch {
                    layer: i + 1,
                    expected: want,
                    found: *dims,
                }
                .into());
            }
        }
    }

    let mut layers = Vec::with_capacity(3);
    let mut prev_out = 1;
    for (i, (dims, kernel, bias)) in raw.into_iter().enumerate() {
        let [kh, kw, in_ch, out_ch] = dims;
        let chains = in_ch == prev_out && (i < 2 || out_ch == 1);
        if kh != kw || kh % 2 == 0 || out_ch == 0 || !chains {
            return Err(FormatError::InvalidDims { layer: i + 1, found: dims }.into());
        }
        if kernel.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(FormatError::NonFinite(i + 1).into());
        }
        prev_out = out_ch;
        layers.push(ConvLayer {
            kernel: ConvKernel::new(out_ch, in_ch, kh, kw, kernel)?,
            bias,
        });
    }
    let layers: [ConvLayer; 3] = layers.try_into().expect("three layers");
    SrcnnWeights::from_layers(layers)
}

pub fn save_weights(w: &SrcnnWeights, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_weights(w))
}

/// Loads weights of the canonical 9-5-5 / 64-32 architecture.
pub fn load_weights(path: impl AsRef<Path>) -> Result<SrcnnWeights> {
    load_weights_as(path, Some(Architecture::CANONICAL))
}

/// Loads weights, requiring `expected` dims when given.
pub fn load_weights_as(path: impl AsRef<Path>, expected: Option<Architecture>) -> Result<SrcnnWeights> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes, expected)
}

/// SHA-256 of the serialized weights, hex encoded.
pub fn weights_hash(w: &SrcnnWeights) -> String {
    hex::encode(Sha256::digest(encode_weights(w)))
}
