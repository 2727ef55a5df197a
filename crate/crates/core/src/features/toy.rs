//! Deterministic pseudo-encoder standing in for a pretrained audio encoder.

use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FeatureError, FeatureStack, MelSpectrogram, StackDims};

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (3.0 / rows as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

/// Maps a log-mel spectrogram to a `[L, T, F]` stack.
///
/// The spectrogram is standardized and average-pooled in time down to `T`
/// frames (pairs of frames when `T = T_mel / 2`). Layer 0 is a seeded random
/// projection followed by `tanh`; layer `l > 0` blends the previous layer with
/// its own seeded projection using mixing weight `1 / (l + 1)`, so every layer
/// is distinct.
pub fn toy_encode(mel: &MelSpectrogram, seed: u64, dims: StackDims) -> Result<FeatureStack<f32>, FeatureError> {
    let dims = dims.validate()?;
    let (t_mel, n_mels) = mel.frames.dim();
    if t_mel == 0 || n_mels == 0 {
        return Err(FeatureError::InvalidDims { layers: dims.layers, frames: t_mel, features: n_mels });
    }

    let x = mel.frames.mapv(f64::from);
    let count = x.len() as f64;
    let mean = x.sum() / count;
    let sd = (x.mapv(|v| (v - mean).powi(2)).sum() / count).sqrt();
    let x = x.mapv(|v| (v - mean) / (sd + 1e-5));

    let mut pooled = Array2::<f64>::zeros((dims.frames, n_mels));
    for t in 0..dims.frames {
        let start = (t * t_mel / dims.frames).min(t_mel - 1);
        let end = ((t + 1) * t_mel / dims.frames).clamp(start + 1, t_mel);
        let span = x.slice(ndarray::s![start..end, ..]);
        pooled.row_mut(t).assign(&span.mean_axis(Axis(0)).expect("nonempty span"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Array3::<f32>::zeros((dims.layers, dims.frames, dims.features));
    let w_in = uniform_matrix(&mut rng, n_mels, dims.features);
    let b_in: Vec<f64> = (0..dims.features).map(|_| rng.random_range(-0.1..0.1)).collect();
    let mut prev = pooled.dot(&w_in);
    for (j, mut col) in prev.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|v| (v + b_in[j]).tanh());
    }
    out.index_axis_mut(Axis(0), 0).assign(&prev.mapv(|v| v as f32));

    for l in 1..dims.layers {
        let w = uniform_matrix(&mut rng, dims.features, dims.features);
        let b: Vec<f64> = (0..dims.features).map(|_| rng.random_range(-0.1..0.1)).collect();
        let mix = 1.0 / (l as f64 + 1.0);
        let mut next = prev.dot(&w);
        for ((_, j), v) in next.indexed_iter_mut() {
            *v = (*v + b[j]).tanh();
        }
        prev = &prev * (1.0 - mix) + &(next * mix);
        out.index_axis_mut(Axis(0), l).assign(&prev.mapv(|v| v as f32));
    }

    let valid = (mel.valid_frames * dims.frames).div_ceil(t_mel).min(dims.frames);
    FeatureStack::new(out, valid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{compute_log_mel, MelConfig, Waveform};

    fn chirp_mel() -> MelSpectrogram {
        let samples: Vec<f32> = (0..8000)
            .map(|i| {
                let t = i as f32 / 16_000.0;
                (2.0 * std::f32::consts::PI * (300.0 + 2000.0 * t) * t).sin()
            })
            .collect();
        compute_log_mel(&Waveform::new(samples, 16_000).unwrap(), &MelConfig::default()).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let mel = chirp_mel();
        let dims = StackDims::new(3, 8, 4);
        let a = toy_encode(&mel, 1, dims).unwrap();
        let b = toy_encode(&mel, 1, dims).unwrap();
        assert_eq!(a, b);
        let c = toy_encode(&mel, 2, dims).unwrap();
        assert!(a.as_slice().iter().zip(c.as_slice()).any(|(x, y)| x != y));
    }

    #[test]
    fn shape_contract_and_distinct_layers() {
        let mel = chirp_mel();
        let s = toy_encode(&mel, 7, StackDims::new(3, 8, 4)).unwrap();
        assert_eq!(s.dims(), StackDims::new(3, 8, 4));
        assert_ne!(s.layer(0), s.layer(1));
        assert_ne!(s.layer(1), s.layer(2));
    }

    #[test]
    fn zero_dims_rejected() {
        let mel = chirp_mel();
        assert!(matches!(
            toy_encode(&mel, 0, StackDims::new(3, 0, 4)),
            Err(FeatureError::InvalidDims { .. })
        ));
    }

    #[test]
    fn half_rate_geometry_and_valid_frames() {
        let cfg = MelConfig::default();
        let w = Waveform::new(vec![0.1; 16_000], 16_000).unwrap();
        let mel = compute_log_mel(&crate::features::pad_or_trim(&w, 2.0).unwrap(), &cfg).unwrap();
        assert_eq!(mel.frame_count(), 200);
        assert_eq!(mel.valid_frames, 100);
        let s = toy_encode(&mel, 3, StackDims::new(2, 100, 6)).unwrap();
        assert_eq!(s.valid_frames(), 50);
    }
}
