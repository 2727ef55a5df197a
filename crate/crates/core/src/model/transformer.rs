//! Pre-norm transformer encoder block.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;

use super::layers::{gelu, gelu_grad, softmax_rows, softmax_rows_backward, LayerNorm, LayerNormCache, Linear};
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SelfAttention<S> {
    pub query: Linear<S>,
    pub key: Linear<S>,
    pub value: Linear<S>,
    pub output: Linear<S>,
}

#[derive(Debug, Clone)]
pub struct AttentionCache<S> {
    q: Array2<S>,
    k: Array2<S>,
    v: Array2<S>,
    probs: Vec<Array2<S>>,
    context: Array2<S>,
}

impl<S: Real> SelfAttention<S> {
    pub fn init(dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            query: Linear::init(dim, dim, rng),
            key: Linear::init(dim, dim, rng),
            value: Linear::init(dim, dim, rng),
            output: Linear::init(dim, dim, rng),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            query: Linear::zeros(dim, dim),
            key: Linear::zeros(dim, dim),
            value: Linear::zeros(dim, dim),
            output: Linear::zeros(dim, dim),
        }
    }

    pub fn forward(&self, x: &ArrayView2<S>, heads: usize) -> (Array2<S>, AttentionCache<S>) {
        let (frames, dim) = x.dim();
        let head_dim = dim / heads;
        let scale = S::one() / S::of(head_dim as f64).sqrt();
        let q = self.query.forward(x);
        let k = self.key.forward(x);
        let v = self.value.forward(x);
        let mut context = Array2::zeros((frames, dim));
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * head_dim..(h + 1) * head_dim];
            let mut p = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut p);
            context.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
            probs.push(p);
        }
        let out = self.output.forward(&context.view());
        (out, AttentionCache { q, k, v, probs, context })
    }

    pub fn backward(
        &self,
        x: &ArrayView2<S>,
        cache: &AttentionCache<S>,
        dout: &ArrayView2<S>,
        grad: &mut SelfAttention<S>,
    ) -> Array2<S> {
        let (frames, dim) = x.dim();
        let heads = cache.probs.len();
        let head_dim = dim / heads;
        let scale = S::one() / S::of(head_dim as f64).sqrt();
        let dcontext = self.output.backward(&cache.context.view(), dout, &mut grad.output);
        let mut dq = Array2::zeros((frames, dim));
        let mut dk = Array2::zeros((frames, dim));
        let mut dv = Array2::zeros((frames, dim));
        for (h, p) in cache.probs.iter().enumerate() {
            let cols = s![.., h * head_dim..(h + 1) * head_dim];
            let dctx = dcontext.slice(cols);
            dv.slice_mut(cols).assign(&p.t().dot(&dctx));
            let dp = dctx.dot(&cache.v.slice(cols).t());
            let dscores = softmax_rows_backward(p, &dp) * scale;
            dq.slice_mut(cols).assign(&dscores.dot(&cache.k.slice(cols)));
            dk.slice_mut(cols).assign(&dscores.t().dot(&cache.q.slice(cols)));
        }
        let mut dx = self.query.backward(x, &dq.view(), &mut grad.query);
        dx += &self.key.backward(x, &dk.view(), &mut grad.key);
        dx += &self.value.backward(x, &dv.view(), &mut grad.value);
        dx
    }
}

/// `h + Attn(LN1(h))`, then `+ FF(LN2(.))` with a GELU feed-forward of width `4d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerBlock<S> {
    pub norm1: LayerNorm<S>,
    pub attention: SelfAttention<S>,
    pub norm2: LayerNorm<S>,
    pub ff_in: Linear<S>,
    pub ff_out: Linear<S>,
}

#[derive(Debug, Clone)]
pub struct BlockCache<S> {
    ln1: LayerNormCache<S>,
    normed1: Array2<S>,
    attention: AttentionCache<S>,
    ln2: LayerNormCache<S>,
    normed2: Array2<S>,
    ff_pre: Array2<S>,
    ff_act: Array2<S>,
}

impl<S: Real> TransformerBlock<S> {
    pub fn ff_width(dim: usize) -> usize {
        4 * dim
    }

    pub fn init(dim: usize, rng: &mut impl Rng) -> Self {
        let width = Self::ff_width(dim);
        Self {
            norm1: LayerNorm::new(dim),
            attention: SelfAttention::init(dim, rng),
            norm2: LayerNorm::new(dim),
            ff_in: Linear::init(dim, width, rng),
            ff_out: Linear::init(width, dim, rng),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        let width = Self::ff_width(dim);
        Self {
            norm1: LayerNorm::zeros(dim),
            attention: SelfAttention::zeros(dim),
            norm2: LayerNorm::zeros(dim),
            ff_in: Linear::zeros(dim, width),
            ff_out: Linear::zeros(width, dim),
        }
    }

    pub fn forward(&self, x: &ArrayView2<S>, heads: usize) -> (Array2<S>, BlockCache<S>) {
        let (normed1, ln1) = self.norm1.forward(x);
        let (attn, attention) = self.attention.forward(&normed1.view(), heads);
        let mid = x + &attn;
        let (normed2, ln2) = self.norm2.forward(&mid.view());
        let ff_pre = self.ff_in.forward(&normed2.view());
        let ff_act = ff_pre.mapv(gelu);
        let out = &mid + &self.ff_out.forward(&ff_act.view());
        (out, BlockCache { ln1, normed1, attention, ln2, normed2, ff_pre, ff_act })
    }

    pub fn backward(&self, cache: &BlockCache<S>, dout: &ArrayView2<S>, grad: &mut TransformerBlock<S>) -> Array2<S> {
        let dact = self.ff_out.backward(&cache.ff_act.view(), dout, &mut grad.ff_out);
        let dpre = dact * &cache.ff_pre.mapv(gelu_grad);
        let dnormed2 = self.ff_in.backward(&cache.normed2.view(), &dpre.view(), &mut grad.ff_in);
        let dmid = dout + &self.norm2.backward(&cache.ln2, &dnormed2.view(), &mut grad.norm2);
        let dnormed1 =
            self.attention
                .backward(&cache.normed1.view(), &cache.attention, &dmid.view(), &mut grad.attention);
        &dmid + &self.norm1.backward(&cache.ln1, &dnormed1.view(), &mut grad.norm1)
    }
}
