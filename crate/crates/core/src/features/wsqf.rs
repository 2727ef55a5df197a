//! WSQF: little-endian binary container for a single feature stack.
//!
//! Layout: magic `"WSQF"`, version `u16`, `L`, `T`, `F`, `valid_frames` as
//! `u32`, dtype code `u8` (0 = f32), then the row-major `[L, T, F]` payload.

use std::fs;
use std::path::Path;

use super::{FeatureError, FeatureStack, StackDims};
use crate::Real;

pub const WSQF_MAGIC: [u8; 4] = *b"WSQF";
pub const WSQF_VERSION: u16 = 1;
pub const WSQF_HEADER_LEN: usize = 4 + 2 + 4 * 4 + 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureFileHeader {
    pub magic: [u8; 4],
    pub version: u16,
    pub layers: u32,
    pub frames: u32,
    pub features: u32,
    pub valid_frames: u32,
    pub dtype: u8,
}

impl FeatureFileHeader {
    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.magic);
        out.extend_from_slice(&self.version.to_le_bytes());
        for v in [self.layers, self.frames, self.features, self.valid_frames] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(self.dtype);
    }

    fn parse(bytes: &[u8]) -> Result<Self, FeatureError> {
        if bytes.len() < 4 {
            return Err(FeatureError::Truncated { expected: WSQF_HEADER_LEN, found: bytes.len() });
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != WSQF_MAGIC {
            return Err(FeatureError::BadMagic { found: magic });
        }
        if bytes.len() < WSQF_HEADER_LEN {
            return Err(FeatureError::Truncated { expected: WSQF_HEADER_LEN, found: bytes.len() });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let header = Self {
            magic,
            version: u16::from_le_bytes([bytes[4], bytes[5]]),
            layers: u32_at(6),
            frames: u32_at(10),
            features: u32_at(14),
            valid_frames: u32_at(18),
            dtype: bytes[22],
        };
        if header.version != WSQF_VERSION {
            return Err(FeatureError::UnsupportedVersion { found: header.version, expected: WSQF_VERSION });
        }
        if header.dtype != DTYPE_F32 {
            return Err(FeatureError::UnsupportedDtype(header.dtype));
        }
        Ok(header)
    }

    pub fn dims(&self) -> StackDims {
        StackDims::new(self.layers as usize, self.frames as usize, self.features as usize)
    }
}

/// Serializes a stack; values are stored as f32 regardless of `S`.
pub fn encode_wsqf<S: Real>(stack: &FeatureStack<S>) -> Vec<u8> {
    let dims = stack.dims();
    let header = FeatureFileHeader {
        magic: WSQF_MAGIC,
        version: WSQF_VERSION,
        layers: dims.layers as u32,
        frames: dims.frames as u32,
        features: dims.features as u32,
        valid_frames: stack.valid_frames() as u32,
        dtype: DTYPE_F32,
    };
    let mut out = Vec::with_capacity(WSQF_HEADER_LEN + dims.len() * 4);
    header.write(&mut out);
    for v in stack.as_slice() {
        out.extend_from_slice(&(v.to_f64_lossless() as f32).to_le_bytes());
    }
    out
}

pub fn decode_wsqf<S: Real>(bytes: &[u8]) -> Result<FeatureStack<S>, FeatureError> {
    let header = FeatureFileHeader::parse(bytes)?;
    let dims = header.dims().validate()?;
    let expected = WSQF_HEADER_LEN + dims.len() * 4;
    if bytes.len() < expected {
        return Err(FeatureError::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(FeatureError::TrailingBytes { extra: bytes.len() - expected });
    }
    let values = bytes[WSQF_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| S::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
        .collect();
    FeatureStack::from_vec(dims, values, header.valid_frames as usize)
}

pub fn save_feature_stack<S: Real>(stack: &FeatureStack<S>, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    let path = path.as_ref();
    fs::write(path, encode_wsqf(stack)).map_err(|source| FeatureError::Io { path: path.display().to_string(), source })
}

pub fn load_feature_stack<S: Real>(path: impl AsRef<Path>) -> Result<FeatureStack<S>, FeatureError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| FeatureError::Io { path: path.display().to_string(), source })?;
    decode_wsqf(&bytes)
}
