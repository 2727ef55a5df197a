//! Dense building blocks with explicit backward passes.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::Real;

const LN_EPS: f64 = 1e-5;

/// Affine map `y = x W + b` applied row-wise; `weight` is `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<S> {
    pub weight: Array2<S>,
    pub bias: Array1<S>,
}

impl<S: Real> Linear<S> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { weight: Array2::zeros((input, output)), bias: Array1::zeros(output) }
    }

    /// Uniform in `±1/sqrt(input)`, zero bias.
    pub fn init(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((input, output), || S::of(rng.random_range(-bound..bound)));
        Self { weight, bias: Array1::zeros(output) }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: &ArrayView2<S>) -> Array2<S> {
        x.dot(&self.weight) + &self.bias
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &ArrayView2<S>, dy: &ArrayView2<S>, grad: &mut Linear<S>) -> Array2<S> {
        general_mat_mul(S::one(), &x.t(), dy, S::one(), &mut grad.weight);
        grad.bias += &dy.sum_axis(Axis(0));
        dy.dot(&self.weight.t())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<S> {
    pub gamma: Array1<S>,
    pub beta: Array1<S>,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache<S> {
    normalized: Array2<S>,
    inv_std: Array1<S>,
}

impl<S: Real> LayerNorm<S> {
    pub fn new(dim: usize) -> Self {
        Self { gamma: Array1::ones(dim), beta: Array1::zeros(dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { gamma: Array1::zeros(dim), beta: Array1::zeros(dim) }
    }

    pub fn forward(&self, x: &ArrayView2<S>) -> (Array2<S>, LayerNormCache<S>) {
        let (rows, cols) = x.dim();
        let n = S::of(cols as f64);
        let eps = S::of(LN_EPS);
        let mut normalized = Array2::zeros((rows, cols));
        let mut inv_std = Array1::zeros(rows);
        for (r, row) in x.outer_iter().enumerate() {
            let mean = row.sum() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
            let inv = S::one() / (var + eps).sqrt();
            inv_std[r] = inv;
            normalized.row_mut(r).zip_mut_with(&row, |o, &v| *o = (v - mean) * inv);
        }
        let y = &normalized * &self.gamma + &self.beta;
        (y, LayerNormCache { normalized, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache<S>, dy: &ArrayView2<S>, grad: &mut LayerNorm<S>) -> Array2<S> {
        grad.gamma += &(dy * &cache.normalized).sum_axis(Axis(0));
        grad.beta += &dy.sum_axis(Axis(0));
        let dxhat = dy * &self.gamma;
        let n = S::of(dy.ncols() as f64);
        let mut dx = Array2::zeros(dy.dim());
        for r in 0..dy.nrows() {
            let g = dxhat.row(r);
            let xh = cache.normalized.row(r);
            let mean_g = g.sum() / n;
            let mean_gx = g.iter().zip(xh).map(|(&a, &b)| a * b).sum::<S>() / n;
            let inv = cache.inv_std[r];
            for c in 0..dy.ncols() {
                dx[[r, c]] = inv * (g[c] - mean_g - xh[c] * mean_gx);
            }
        }
        dx
    }
}

const GELU_COEF: f64 = 0.044_715;

/// Tanh approximation of GELU.
pub fn gelu<S: Real>(x: S) -> S {
    let c = S::of((2.0 / std::f64::consts::PI).sqrt());
    let inner = c * (x + S::of(GELU_COEF) * x * x * x);
    S::of(0.5) * x * (S::one() + inner.tanh())
}

pub fn gelu_grad<S: Real>(x: S) -> S {
    let c = S::of((2.0 / std::f64::consts::PI).sqrt());
    let k = S::of(GELU_COEF);
    let t = (c * (x + k * x * x * x)).tanh();
    let half = S::of(0.5);
    half * (S::one() + t) + half * x * (S::one() - t * t) * c * (S::one() + S::of(3.0) * k * x * x)
}

pub fn sigmoid<S: Real>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// Numerically stable softmax of a slice.
pub fn softmax<S: Real>(scores: &[S]) -> Vec<S> {
    let max = scores.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn softmax_rows<S: Real>(scores: &mut Array2<S>) {
    for mut row in scores.outer_iter_mut() {
        let p = softmax(row.as_slice().expect("contiguous row"));
        row.iter_mut().zip(p).for_each(|(o, v)| *o = v);
    }
}

/// Backward of a row-wise softmax: `ds = p * (dp - <p, dp>)`.
pub fn softmax_rows_backward<S: Real>(probs: &Array2<S>, dprobs: &Array2<S>) -> Array2<S> {
    let mut ds = Array2::zeros(probs.dim());
    for r in 0..probs.nrows() {
        let dot: S = probs.row(r).iter().zip(dprobs.row(r)).map(|(&p, &d)| p * d).sum();
        for c in 0..probs.ncols() {
            ds[[r, c]] = probs[[r, c]] * (dprobs[[r, c]] - dot);
        }
    }
    ds
}

/// Sinusoidal positional encoding, `[frames, dim]`.
pub fn positional_encoding<S: Real>(frames: usize, dim: usize) -> Array2<S> {
    Array2::from_shape_fn((frames, dim), |(t, i)| {
        let pair = (i / 2) as f64;
        let angle = t as f64 / 10_000f64.powf(2.0 * pair / dim as f64);
        S::of(if i % 2 == 0 { angle.sin() } else { angle.cos() })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gelu_grad_matches_difference() {
        for x in [-3.0f64, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn sigmoid_is_symmetric_and_bounded() {
        for x in [-30.0f64, -1.0, 0.0, 2.0, 30.0] {
            let s = sigmoid(x);
            assert!(s > 0.0 && s < 1.0);
            assert!((s + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0f64, 1000.0, -5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn layer_norm_rows_are_standardized() {
        let ln = LayerNorm::<f64>::new(4);
        let x = array![[1.0, 2.0, 3.0, 4.0], [-2.0, 0.0, 2.0, 8.0]];
        let (y, _) = ln.forward(&x.view());
        for row in y.outer_iter() {
            assert!(row.sum().abs() < 1e-12);
            let var = row.iter().map(|v| v * v).sum::<f64>() / 4.0;
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn positional_encoding_first_row() {
        let pe = positional_encoding::<f64>(3, 4);
        assert_eq!(pe.row(0).to_vec(), vec![0.0, 1.0, 0.0, 1.0]);
        assert!((pe[[1, 0]] - 1f64.sin()).abs() < 1e-15);
    }
}
