//! Feature-stack contract, audio frontend, toy encoder and the WSQF file format.
//!
//! A [`FeatureStack`] holds the per-layer outputs of an audio encoder for one
//! utterance as an `[L, T, F]` array (layers, frames, feature dimension). Real
//! stacks are produced offline from encoder weights and stored as WSQF files;
//! [`toy_encode`] provides a deterministic stand-in so the pipeline runs end to
//! end without any pretrained model.

mod mel;
mod stack;
mod toy;
mod wsqf;

pub use mel::{compute_log_mel, hz_to_mel, mel_to_hz, pad_or_trim, MelConfig, MelSpectrogram, Waveform};
pub use stack::{FeatureStack, StackDims};
pub use toy::toy_encode;
pub use wsqf::{
    decode_wsqf, encode_wsqf, load_feature_stack, save_feature_stack, FeatureFileHeader,
    WSQF_HEADER_LEN, WSQF_MAGIC, WSQF_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("target duration must be positive and finite, got {0}")]
    InvalidTarget(f64),
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("waveform sample rate {found} Hz does not match frontend rate {expected} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },
    #[error("waveform is empty")]
    EmptyWaveform,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid stack dimensions {layers}x{frames}x{features}: all must be nonzero")]
    InvalidDims { layers: usize, frames: usize, features: usize },
    #[error("valid_frames {valid} exceeds frame count {frames}")]
    InvalidValidFrames { valid: usize, frames: usize },
    #[error("bad magic {found:?}, expected \"WSQF\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported WSQF version {found} (this build reads version {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },
    #[error("unsupported dtype code {0} (only 0 = f32 little-endian is defined)")]
    UnsupportedDtype(u8),
    #[error("truncated WSQF data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("WSQF data has {extra} trailing bytes after the payload")]
    TrailingBytes { extra: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
