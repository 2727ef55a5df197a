use ndarray::{Array2, Zip};

use super::layers::{positional_encoding, LayerNormCache};
use super::pooling::HeadCache;
use super::transformer::BlockCache;
use super::{ArchConfig, ModelError, ModelParams};
use crate::features::FeatureStack;
use crate::Real;

/// One sigmoid score per head, in head order.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<S> {
    pub head_names: Vec<String>,
    pub scores: Vec<S>,
}

impl<S: Real> Prediction<S> {
    pub fn get(&self, head: &str) -> Option<S> {
        self.head_names.iter().position(|h| h == head).map(|i| self.scores[i])
    }
}

/// Intermediate activations of one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<S> {
    fused: Array2<S>,
    blocks: Vec<BlockCache<S>>,
    final_norm: LayerNormCache<S>,
    trunk: Array2<S>,
    heads: Vec<HeadCache<S>>,
}

impl<S: Real> ForwardCache<S> {
    pub fn scores(&self) -> Vec<S> {
        self.heads.iter().map(|h| h.score).collect()
    }

    /// Attention weights over frames used by head `i`.
    pub fn frame_weights(&self, i: usize) -> &ndarray::Array1<S> {
        self.heads[i].frame_weights()
    }
}

/// Weighted sum of the stack's layers: `out[t, f] = sum_l alpha[l] * stack[l, t, f]`.
pub fn fuse_layers<S: Real>(stack: &FeatureStack<S>, alpha: &[S]) -> Result<Array2<S>, ModelError> {
    let layers = stack.layer_count();
    if alpha.len() != layers {
        return Err(ModelError::AlphaLength { expected: layers, found: alpha.len() });
    }
    let mut out = Array2::zeros((stack.frame_count(), stack.feature_dim()));
    for (l, &a) in alpha.iter().enumerate() {
        out.scaled_add(a, &stack.layer(l));
    }
    Ok(out)
}

fn check_dims<S: Real>(stack: &FeatureStack<S>, arch: &ArchConfig) -> Result<(), ModelError> {
    if stack.dims() != arch.stack_dims() {
        return Err(ModelError::DimensionMismatch { expected: arch.stack_dims(), found: stack.dims() });
    }
    Ok(())
}

/// Runs the predictor and keeps the activations needed for [`backward`].
pub fn forward_with_cache<S: Real>(
    stack: &FeatureStack<S>,
    params: &ModelParams<S>,
    arch: &ArchConfig,
) -> Result<ForwardCache<S>, ModelError> {
    check_dims(stack, arch)?;
    let fused = fuse_layers(stack, params.alpha.as_slice().expect("standard layout"))?;
    let mut h = params.projection.forward(&fused.view()) + &positional_encoding(arch.frame_count, arch.model_dim);
    let mut blocks = Vec::with_capacity(params.blocks.len());
    for block in &params.blocks {
        let (out, cache) = block.forward(&h.view(), arch.attention_heads);
        blocks.push(cache);
        h = out;
    }
    let (trunk, final_norm) = params.final_norm.forward(&h.view());
    let heads = params.heads.iter().map(|head| head.forward(&trunk.view()).1).collect();
    Ok(ForwardCache { fused, blocks, final_norm, trunk, heads })
}

/// Predicts one score per head for a single feature stack.
pub fn forward<S: Real>(
    stack: &FeatureStack<S>,
    params: &ModelParams<S>,
    arch: &ArchConfig,
) -> Result<Prediction<S>, ModelError> {
    let cache = forward_with_cache(stack, params, arch)?;
    Ok(Prediction { head_names: arch.head_names.clone(), scores: cache.scores() })
}

/// Accumulates into `grads` the parameter gradients for upstream loss
/// gradients `upstream[i] = dL/d score_i`.
pub fn backward<S: Real>(
    stack: &FeatureStack<S>,
    params: &ModelParams<S>,
    arch: &ArchConfig,
    cache: &ForwardCache<S>,
    upstream: &[S],
    grads: &mut ModelParams<S>,
) -> Result<(), ModelError> {
    check_dims(stack, arch)?;
    if upstream.len() != params.heads.len() {
        return Err(ModelError::UpstreamLength { expected: params.heads.len(), found: upstream.len() });
    }
    let mut dtrunk = Array2::zeros(cache.trunk.dim());
    for (i, head) in params.heads.iter().enumerate() {
        if upstream[i] == S::zero() {
            continue;
        }
        dtrunk += &head.backward(&cache.trunk.view(), &cache.heads[i], upstream[i], &mut grads.heads[i]);
    }
    let mut dh = params.final_norm.backward(&cache.final_norm, &dtrunk.view(), &mut grads.final_norm);
    for (i, block) in params.blocks.iter().enumerate().rev() {
        dh = block.backward(&cache.blocks[i], &dh.view(), &mut grads.blocks[i]);
    }
    let dfused = params.projection.backward(&cache.fused.view(), &dh.view(), &mut grads.projection);
    for (l, g) in grads.alpha.iter_mut().enumerate() {
        let mut acc = S::zero();
        Zip::from(&stack.layer(l)).and(&dfused).for_each(|&x, &d| acc += x * d);
        *g += acc;
    }
    Ok(())
}

/// Forward then backward for one example; returns fresh gradients.
pub fn gradients<S: Real>(
    stack: &FeatureStack<S>,
    params: &ModelParams<S>,
    arch: &ArchConfig,
    upstream: &[S],
) -> Result<ModelParams<S>, ModelError> {
    let cache = forward_with_cache(stack, params, arch)?;
    let mut grads = params.zeros_like();
    backward(stack, params, arch, &cache, upstream, &mut grads)?;
    Ok(grads)
}
