#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqpredict::features::{FeatureStack, StackDims};
use sqpredict::model::ArchConfig;

pub fn tiny_arch(heads: &[&str]) -> ArchConfig {
    ArchConfig {
        layer_count: 3,
        frame_count: 8,
        feature_dim: 8,
        model_dim: 8,
        transformer_layers: 1,
        attention_heads: 2,
        head_names: heads.iter().map(|h| h.to_string()).collect(),
    }
}

pub fn random_stack(dims: StackDims, rng: &mut ChaCha8Rng) -> FeatureStack<f64> {
    let values = (0..dims.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    FeatureStack::from_vec(dims, values, dims.frames).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
