//! Attention pooling over time and the per-dimension output heads.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use super::layers::{sigmoid, softmax, Linear};
use crate::Real;

/// Frame scoring network `s_t = w · tanh(W h_t + b)`.
///
/// The score projection carries no bias since a constant shift of all scores
/// leaves the softmax unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionPooling<S> {
    pub hidden: Linear<S>,
    pub score: Array1<S>,
}

#[derive(Debug, Clone)]
pub struct PoolCache<S> {
    activations: Array2<S>,
    pub weights: Array1<S>,
}

impl<S: Real> AttentionPooling<S> {
    pub fn init(dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            hidden: Linear::init(dim, hidden, rng),
            score: Array1::from_shape_simple_fn(hidden, || S::of(rng.random_range(-bound..bound))),
        }
    }

    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self { hidden: Linear::zeros(dim, hidden), score: Array1::zeros(hidden) }
    }

    /// Softmax frame weights and the weighted frame sum.
    pub fn forward(&self, h: &ArrayView2<S>) -> (Array1<S>, PoolCache<S>) {
        let activations = self.hidden.forward(h).mapv(S::tanh);
        let scores = activations.dot(&self.score);
        let weights = Array1::from(softmax(scores.as_slice().expect("contiguous")));
        let pooled = h.t().dot(&weights);
        (pooled, PoolCache { activations, weights })
    }

    pub fn backward(
        &self,
        h: &ArrayView2<S>,
        cache: &PoolCache<S>,
        dpooled: &ArrayView1<S>,
        grad: &mut AttentionPooling<S>,
    ) -> Array2<S> {
        let w = &cache.weights;
        let frames = w.len();
        let mut dh = outer(&w.view(), dpooled);
        let dw = h.dot(dpooled);
        let mean = w.dot(&dw);
        let dscores = Array1::from_shape_fn(frames, |t| w[t] * (dw[t] - mean));
        grad.score += &cache.activations.t().dot(&dscores);
        let mut dpre = outer(&dscores.view(), &self.score.view());
        dpre.zip_mut_with(&cache.activations, |g, &a| *g *= S::one() - a * a);
        dh += &self.hidden.backward(h, &dpre.view(), &mut grad.hidden);
        dh
    }
}

fn outer<S: Real>(a: &ArrayView1<S>, b: &ArrayView1<S>) -> Array2<S> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// Standalone attention pooling: returns the pooled vector and the frame weights.
pub fn attention_pool<S: Real>(h: &ArrayView2<S>, pooling: &AttentionPooling<S>) -> (Array1<S>, Array1<S>) {
    let (pooled, cache) = pooling.forward(h);
    (pooled, cache.weights)
}

/// One prediction head: attention pooling, a `d -> 1` linear layer and a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputHead<S> {
    pub pooling: AttentionPooling<S>,
    pub output: Linear<S>,
}

#[derive(Debug, Clone)]
pub struct HeadCache<S> {
    pool: PoolCache<S>,
    pooled: Array1<S>,
    pub score: S,
}

impl<S: Real> OutputHead<S> {
    pub fn init(dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self { pooling: AttentionPooling::init(dim, hidden, rng), output: Linear::init(dim, 1, rng) }
    }

    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self { pooling: AttentionPooling::zeros(dim, hidden), output: Linear::zeros(dim, 1) }
    }

    pub fn forward(&self, h: &ArrayView2<S>) -> (S, HeadCache<S>) {
        let (pooled, pool) = self.pooling.forward(h);
        let logit = pooled.dot(&self.output.weight.column(0)) + self.output.bias[0];
        let score = sigmoid(logit);
        (score, HeadCache { pool, pooled, score })
    }

    /// `dscore` is the loss gradient with respect to this head's sigmoid output.
    pub fn backward(&self, h: &ArrayView2<S>, cache: &HeadCache<S>, dscore: S, grad: &mut OutputHead<S>) -> Array2<S> {
        let dlogit = dscore * cache.score * (S::one() - cache.score);
        grad.output.weight.column_mut(0).scaled_add(dlogit, &cache.pooled);
        grad.output.bias[0] += dlogit;
        let dpooled = self.output.weight.column(0).mapv(|w| w * dlogit);
        self.pooling.backward(h, &cache.pool, &dpooled.view(), &mut grad.pooling)
    }
}

impl<S: Real> HeadCache<S> {
    pub fn frame_weights(&self) -> &Array1<S> {
        &self.pool.weights
    }
}
