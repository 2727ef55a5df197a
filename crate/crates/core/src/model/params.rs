use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{LayerNorm, Linear};
use super::pooling::OutputHead;
use super::transformer::TransformerBlock;
use super::{ArchConfig, ModelError};
use crate::Real;

/// Every learnable parameter of the predictor.
///
/// Gradients use the same type, so the parameter layout doubles as the
/// gradient layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    /// One weight per encoder layer for the fused feature.
    pub alpha: Array1<S>,
    pub projection: Linear<S>,
    pub blocks: Vec<TransformerBlock<S>>,
    pub final_norm: LayerNorm<S>,
    pub heads: Vec<OutputHead<S>>,
}

/// Coarse parameter families used for reporting and gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    Alpha,
    Projection,
    Attention,
    FeedForward,
    Norm,
    Pooling,
    Output,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 7] = [
        ParamGroup::Alpha,
        ParamGroup::Projection,
        ParamGroup::Attention,
        ParamGroup::FeedForward,
        ParamGroup::Norm,
        ParamGroup::Pooling,
        ParamGroup::Output,
    ];

    pub fn of(name: &str) -> ParamGroup {
        if name == "alpha" {
            ParamGroup::Alpha
        } else if name.starts_with("projection.") {
            ParamGroup::Projection
        } else if name.contains("norm") {
            ParamGroup::Norm
        } else if name.contains(".attention.") {
            ParamGroup::Attention
        } else if name.contains(".feed_forward.") {
            ParamGroup::FeedForward
        } else if name.contains(".pooling.") {
            ParamGroup::Pooling
        } else {
            ParamGroup::Output
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Alpha => "alpha",
            ParamGroup::Projection => "projection",
            ParamGroup::Attention => "attention",
            ParamGroup::FeedForward => "feed_forward",
            ParamGroup::Norm => "norm",
            ParamGroup::Pooling => "pooling",
            ParamGroup::Output => "output",
        }
    }
}

fn slice<S>(a: &Array1<S>) -> &[S] {
    a.as_slice().expect("standard layout")
}

fn slice_mut<S>(a: &mut Array1<S>) -> &mut [S] {
    a.as_slice_mut().expect("standard layout")
}

fn push_linear<'a, S>(out: &mut Vec<(String, &'a [S])>, prefix: &str, lin: &'a Linear<S>) {
    out.push((format!("{prefix}.weight"), lin.weight.as_slice().expect("standard layout")));
    out.push((format!("{prefix}.bias"), slice(&lin.bias)));
}

fn push_linear_mut<'a, S>(out: &mut Vec<&'a mut [S]>, lin: &'a mut Linear<S>) {
    out.push(lin.weight.as_slice_mut().expect("standard layout"));
    out.push(slice_mut(&mut lin.bias));
}

fn push_norm<'a, S>(out: &mut Vec<(String, &'a [S])>, prefix: &str, norm: &'a LayerNorm<S>) {
    out.push((format!("{prefix}.gamma"), slice(&norm.gamma)));
    out.push((format!("{prefix}.beta"), slice(&norm.beta)));
}

fn push_norm_mut<'a, S>(out: &mut Vec<&'a mut [S]>, norm: &'a mut LayerNorm<S>) {
    out.push(slice_mut(&mut norm.gamma));
    out.push(slice_mut(&mut norm.beta));
}

impl<S: Real> ModelParams<S> {
    /// Deterministic initialization: `alpha = 1/L`, weights uniform in
    /// `±1/sqrt(fan_in)`, zero biases, unit norm gains.
    pub fn init(arch: &ArchConfig, seed: u64) -> Result<Self, ModelError> {
        arch.validate()?;
        let d = arch.model_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projection = Linear::init(arch.feature_dim, d, &mut rng);
        let blocks = (0..arch.transformer_layers).map(|_| TransformerBlock::init(d, &mut rng)).collect();
        let heads = arch.head_names.iter().map(|_| OutputHead::init(d, d, &mut rng)).collect();
        Ok(Self {
            alpha: Array1::from_elem(arch.layer_count, S::one() / S::of(arch.layer_count as f64)),
            projection,
            blocks,
            final_norm: LayerNorm::new(d),
            heads,
        })
    }

    /// All-zero parameters with the shape implied by `arch`.
    pub fn zeros(arch: &ArchConfig) -> Self {
        let d = arch.model_dim;
        Self {
            alpha: Array1::zeros(arch.layer_count),
            projection: Linear::zeros(arch.feature_dim, d),
            blocks: (0..arch.transformer_layers).map(|_| TransformerBlock::zeros(d)).collect(),
            final_norm: LayerNorm::zeros(d),
            heads: arch.head_names.iter().map(|_| OutputHead::zeros(d, d)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(S::zero());
        z
    }

    pub fn fill(&mut self, value: S) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }

    /// Named tensors in canonical order.
    pub fn tensors(&self) -> Vec<(String, &[S])> {
        let mut out = vec![("alpha".to_string(), slice(&self.alpha))];
        push_linear(&mut out, "projection", &self.projection);
        for (i, b) in self.blocks.iter().enumerate() {
            push_norm(&mut out, &format!("blocks.{i}.norm1"), &b.norm1);
            let a = &b.attention;
            push_linear(&mut out, &format!("blocks.{i}.attention.query"), &a.query);
            push_linear(&mut out, &format!("blocks.{i}.attention.key"), &a.key);
            push_linear(&mut out, &format!("blocks.{i}.attention.value"), &a.value);
            push_linear(&mut out, &format!("blocks.{i}.attention.output"), &a.output);
            push_norm(&mut out, &format!("blocks.{i}.norm2"), &b.norm2);
            push_linear(&mut out, &format!("blocks.{i}.feed_forward.in"), &b.ff_in);
            push_linear(&mut out, &format!("blocks.{i}.feed_forward.out"), &b.ff_out);
        }
        push_norm(&mut out, "final_norm", &self.final_norm);
        for (i, h) in self.heads.iter().enumerate() {
            push_linear(&mut out, &format!("heads.{i}.pooling.hidden"), &h.pooling.hidden);
            out.push((format!("heads.{i}.pooling.score"), slice(&h.pooling.score)));
            push_linear(&mut out, &format!("heads.{i}.output"), &h.output);
        }
        out
    }

    /// Mutable tensors in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [S]> {
        let mut out = vec![slice_mut(&mut self.alpha)];
        push_linear_mut(&mut out, &mut self.projection);
        for b in &mut self.blocks {
            push_norm_mut(&mut out, &mut b.norm1);
            let a = &mut b.attention;
            push_linear_mut(&mut out, &mut a.query);
            push_linear_mut(&mut out, &mut a.key);
            push_linear_mut(&mut out, &mut a.value);
            push_linear_mut(&mut out, &mut a.output);
            push_norm_mut(&mut out, &mut b.norm2);
            push_linear_mut(&mut out, &mut b.ff_in);
            push_linear_mut(&mut out, &mut b.ff_out);
        }
        push_norm_mut(&mut out, &mut self.final_norm);
        for h in &mut self.heads {
            push_linear_mut(&mut out, &mut h.pooling.hidden);
            out.push(slice_mut(&mut h.pooling.score));
            push_linear_mut(&mut out, &mut h.output);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<S> {
        self.tensors().into_iter().flat_map(|(_, t)| t.iter().copied()).collect()
    }

    /// Overwrites every parameter from a flat buffer in canonical order.
    pub fn copy_from_flat(&mut self, values: &[S]) -> Result<(), ModelError> {
        let expected = self.param_count();
        if values.len() != expected {
            return Err(ModelError::ParamCount { expected, found: values.len() });
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, scale: S, other: &ModelParams<S>) {
        for (dst, (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.iter_mut().zip(src).for_each(|(d, &s)| *d += scale * s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self, arch: &ArchConfig) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(arch);
        let flat: Vec<U> = self.to_flat().into_iter().map(|v| U::of(v.to_f64_lossless())).collect();
        out.copy_from_flat(&flat).expect("same architecture");
        out
    }
}

/// Initializes parameters for `arch` from `seed`.
pub fn init_params<S: Real>(arch: &ArchConfig, seed: u64) -> Result<ModelParams<S>, ModelError> {
    ModelParams::init(arch, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(layers: usize, features: usize, dim: usize, blocks: usize, heads: &[&str]) -> ArchConfig {
        ArchConfig {
            layer_count: layers,
            frame_count: 4,
            feature_dim: features,
            model_dim: dim,
            transformer_layers: blocks,
            attention_heads: 4,
            head_names: heads.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Parameter count enumerated from the individual tensor shapes.
    fn enumerated_count(l: usize, f: usize, d: usize, blocks: usize, heads: usize) -> usize {
        let linear = |i: usize, o: usize| i * o + o;
        let norm = 2 * d;
        let block = norm + 4 * linear(d, d) + norm + linear(d, 4 * d) + linear(4 * d, d);
        let head = linear(d, d) + d + linear(d, 1);
        l + linear(f, d) + blocks * block + norm + heads * head
    }

    #[test]
    fn reference_parameter_count() {
        let a = arch(13, 768, 256, 4, &["MOS"]);
        let p = ModelParams::<f32>::init(&a, 0).unwrap();
        assert_eq!(p.param_count(), enumerated_count(13, 768, 256, 4, 1));
        let multi = arch(13, 768, 256, 4, &["MOS", "NOI", "COL", "DIS", "LOUD"]);
        let p = ModelParams::<f32>::init(&multi, 0).unwrap();
        assert_eq!(p.param_count(), enumerated_count(13, 768, 256, 4, 5));
    }

    #[test]
    fn alpha_starts_uniform() {
        let p = ModelParams::<f64>::init(&arch(13, 8, 8, 1, &["MOS"]), 3).unwrap();
        assert_eq!(p.alpha.len(), 13);
        assert!(p.alpha.iter().all(|&a| a == 1.0 / 13.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = arch(3, 8, 8, 2, &["MOS", "NOI"]);
        assert_eq!(ModelParams::<f64>::init(&a, 9).unwrap(), ModelParams::<f64>::init(&a, 9).unwrap());
        assert_ne!(ModelParams::<f64>::init(&a, 9).unwrap(), ModelParams::<f64>::init(&a, 10).unwrap());
    }

    #[test]
    fn names_and_mut_views_align() {
        let a = arch(3, 8, 8, 2, &["MOS", "NOI"]);
        let mut p = ModelParams::<f64>::init(&a, 1).unwrap();
        let lens: Vec<usize> = p.tensors().iter().map(|(_, t)| t.len()).collect();
        let mut_lens: Vec<usize> = p.tensors_mut().iter().map(|t| t.len()).collect();
        assert_eq!(lens, mut_lens);
        let flat = p.to_flat();
        let mut q = ModelParams::<f64>::zeros(&a);
        q.copy_from_flat(&flat).unwrap();
        assert_eq!(p, q);
        assert!(q.copy_from_flat(&flat[1..]).is_err());
    }

    #[test]
    fn every_group_is_populated() {
        let p = ModelParams::<f64>::init(&arch(3, 8, 8, 1, &["MOS"]), 1).unwrap();
        for g in ParamGroup::ALL {
            assert!(p.tensors().iter().any(|(n, _)| ParamGroup::of(n) == g), "{g:?}");
        }
        assert_eq!(ParamGroup::of("blocks.0.norm1.gamma"), ParamGroup::Norm);
        assert_eq!(ParamGroup::of("heads.1.output.bias"), ParamGroup::Output);
        assert_eq!(ParamGroup::of("heads.1.pooling.score"), ParamGroup::Pooling);
    }
}
