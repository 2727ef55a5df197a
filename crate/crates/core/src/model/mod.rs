//! The quality predictor: layer fusion, input projection, transformer trunk
//! and one attention-pooling sigmoid head per quality dimension.
//!
//! Forward and backward passes are written out by hand so that every gradient,
//! including the layer-fusion weights, is exact and checkable against finite
//! differences.

mod layers;
mod network;
mod params;
mod pooling;
mod transformer;

pub use layers::{gelu, positional_encoding, sigmoid, softmax, LayerNorm, Linear};
pub use network::{backward, forward, forward_with_cache, fuse_layers, gradients, ForwardCache, Prediction};
pub use params::{init_params, ModelParams, ParamGroup};
pub use pooling::{attention_pool, AttentionPooling, OutputHead};
pub use transformer::{SelfAttention, TransformerBlock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::StackDims;

pub const SINGLE_HEAD: [&str; 1] = ["MOS"];
pub const MULTI_HEAD: [&str; 5] = ["MOS", "NOI", "COL", "DIS", "LOUD"];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid architecture: {0}")]
    InvalidConfig(String),
    #[error("alpha has {found} entries but the stack has {expected} layers")]
    AlphaLength { expected: usize, found: usize },
    #[error("stack dims {found:?} do not match architecture {expected:?}")]
    DimensionMismatch { expected: StackDims, found: StackDims },
    #[error("expected {expected} upstream gradients (one per head), got {found}")]
    UpstreamLength { expected: usize, found: usize },
    #[error("expected {expected} parameters, got {found}")]
    ParamCount { expected: usize, found: usize },
}

/// Shape of the predictor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub layer_count: usize,
    pub frame_count: usize,
    pub feature_dim: usize,
    pub model_dim: usize,
    pub transformer_layers: usize,
    pub attention_heads: usize,
    pub head_names: Vec<String>,
}

impl ArchConfig {
    /// Reference geometry: 13 encoder layers of 1500 x 768, d = 256, 4 blocks, 4 heads.
    pub fn reference(head_names: &[&str]) -> Self {
        Self {
            layer_count: 13,
            frame_count: 1500,
            feature_dim: 768,
            model_dim: 256,
            transformer_layers: 4,
            attention_heads: 4,
            head_names: head_names.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Default trunk for stacks of the given shape.
    pub fn for_stack(dims: StackDims, head_names: &[&str]) -> Self {
        Self {
            layer_count: dims.layers,
            frame_count: dims.frames,
            feature_dim: dims.features,
            ..Self::reference(head_names)
        }
    }

    pub fn stack_dims(&self) -> StackDims {
        StackDims::new(self.layer_count, self.frame_count, self.feature_dim)
    }

    pub fn head_count(&self) -> usize {
        self.head_names.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.layer_count == 0 || self.frame_count == 0 || self.feature_dim == 0 {
            return fail("layer_count, frame_count and feature_dim must be positive");
        }
        if self.model_dim == 0 || self.attention_heads == 0 {
            return fail("model_dim and attention_heads must be positive");
        }
        if !self.model_dim.is_multiple_of(self.attention_heads) {
            return fail("model_dim must be divisible by attention_heads");
        }
        if self.transformer_layers == 0 {
            return fail("transformer_layers must be at least 1");
        }
        if self.head_names.is_empty() {
            return fail("head_names must be nonempty");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let mut a = ArchConfig::reference(&SINGLE_HEAD);
        assert!(a.validate().is_ok());
        a.attention_heads = 3;
        assert!(a.validate().is_err());
        a.attention_heads = 4;
        a.head_names.clear();
        assert!(a.validate().is_err());
        let mut a = ArchConfig::reference(&MULTI_HEAD);
        a.transformer_layers = 0;
        assert!(a.validate().is_err());
    }
}
