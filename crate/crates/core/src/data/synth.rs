//! Synthetic labeled feature stacks with a planted quality signal.
//!
//! Each example draws latent levels `z_k` (one per quality dimension, the
//! secondary ones correlated with the first). The label of dimension `k` is
//! `0.2 + 0.8 * sigmoid(z_k)` plus optional Gaussian noise, clipped to
//! `[0.2, 1]`. Features carry `z_k` along fixed per-dimension directions over
//! the valid frames, scaled by a per-layer gain, on top of per-layer Gaussian
//! background. Directions and gains come from `world_seed`, so separately
//! generated train and test sets share the same feature-to-label mapping.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{manifest::write_manifest, DataError, DatasetRecord, Example, Scale, Subset, NORMALIZED_MAX, NORMALIZED_MIN};
use crate::features::{save_feature_stack, FeatureStack, StackDims};
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub dims: StackDims,
    /// Standard deviation of label noise on the normalized scale.
    pub noise_sd: f64,
    pub seed: u64,
    /// Seed of the shared feature-to-label mapping.
    pub world_seed: u64,
    /// Number of labeled quality dimensions (1 = MOS only, up to 5).
    pub dimensions: usize,
    /// Correlation of each secondary latent with the MOS latent.
    pub correlation: f64,
    pub dataset: String,
    /// Half-width of the uniform latent distribution.
    pub latent_range: f64,
    pub background_sd: f64,
}

impl SynthSpec {
    pub fn new(n: usize, dims: StackDims, noise_sd: f64, seed: u64) -> Self {
        Self {
            n,
            dims,
            noise_sd,
            seed,
            world_seed: 0,
            dimensions: 1,
            correlation: 0.6,
            dataset: "SYNTH".to_string(),
            latent_range: 2.5,
            background_sd: 0.5,
        }
    }

    pub fn with_dimensions(mut self, dimensions: usize) -> Self {
        self.dimensions = dimensions;
        self
    }

    pub fn with_dataset(mut self, dataset: &str) -> Self {
        self.dataset = dataset.to_string();
        self
    }

    pub fn with_world_seed(mut self, world_seed: u64) -> Self {
        self.world_seed = world_seed;
        self
    }

    fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidSynthSpec(m.to_string()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if self.dims.validate().is_err() {
            return bad("dims must all be nonzero");
        }
        if !(1..=5).contains(&self.dimensions) {
            return bad("dimensions must be between 1 and 5");
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad("noise_sd must be finite and nonnegative");
        }
        if !(-1.0..=1.0).contains(&self.correlation) {
            return bad("correlation must lie in [-1, 1]");
        }
        if !(self.latent_range > 0.0 && self.background_sd >= 0.0) {
            return bad("latent_range must be positive and background_sd nonnegative");
        }
        Ok(())
    }

    /// Noise-free label for a latent level.
    pub fn planted_label(latent: f64) -> f64 {
        NORMALIZED_MIN + (NORMALIZED_MAX - NORMALIZED_MIN) / (1.0 + (-latent).exp())
    }

    pub fn generate(&self) -> Result<SynthDataset, DataError> {
        self.validate()?;
        let StackDims { layers, frames, features } = self.dims;

        let mut world = ChaCha8Rng::seed_from_u64(self.world_seed);
        let scale = 1.0 / (features as f64).sqrt() * 2.0;
        let directions =
            Array2::from_shape_fn((self.dimensions, features), |_| scale * world.sample::<f64, _>(StandardNormal));
        let gains: Vec<f64> = (0..layers)
            .map(|l| (std::f64::consts::PI * (l + 1) as f64 / (layers + 1) as f64).sin())
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let label_noise = Normal::new(0.0, self.noise_sd).expect("validated sd");
        let mix = (1.0 - self.correlation * self.correlation).sqrt();
        let mut examples = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let base: f64 = rng.random_range(-self.latent_range..self.latent_range);
            let mut latents = vec![base];
            for _ in 1..self.dimensions {
                let own: f64 = rng.random_range(-self.latent_range..self.latent_range);
                latents.push(self.correlation * base + mix * own);
            }
            let labels: Vec<f64> = latents
                .iter()
                .map(|&z| {
                    let noise = if self.noise_sd > 0.0 { label_noise.sample(&mut rng) } else { 0.0 };
                    (Self::planted_label(z) + noise).clamp(NORMALIZED_MIN, NORMALIZED_MAX)
                })
                .collect();

            let valid = rng.random_range(frames.div_ceil(2)..=frames);
            let signal: Vec<f64> = (0..features)
                .map(|f| latents.iter().enumerate().map(|(k, z)| z * directions[[k, f]]).sum())
                .collect();
            let mut data = Array3::<f32>::zeros((layers, frames, features));
            for ((l, t, f), v) in data.indexed_iter_mut() {
                let bg: f64 = rng.sample(StandardNormal);
                *v = if t < valid {
                    (gains[l] * signal[f] + self.background_sd * bg) as f32
                } else {
                    (0.05 * self.background_sd * bg) as f32
                };
            }
            let stack = FeatureStack::new(data, valid).expect("finite synthetic stack");
            examples.push(SynthExample { id: format!("{}_{i:05}", self.dataset.to_lowercase()), stack, latents, labels });
        }
        Ok(SynthDataset { spec: self.clone(), examples })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthExample {
    pub id: String,
    pub stack: FeatureStack<f32>,
    pub latents: Vec<f64>,
    /// Normalized labels, one per dimension.
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub spec: SynthSpec,
    pub examples: Vec<SynthExample>,
}

impl SynthDataset {
    /// In-memory training examples for the first `heads` label dimensions.
    pub fn to_examples<S: Real>(&self, heads: usize) -> Result<Vec<Example<S>>, DataError> {
        if heads > self.spec.dimensions {
            return Err(DataError::MissingLabel {
                id: self.examples[0].id.clone(),
                head: super::LABEL_COLUMNS[self.spec.dimensions.min(4)].1.to_string(),
            });
        }
        Ok(self
            .examples
            .iter()
            .map(|e| Example {
                id: e.id.clone(),
                stack: e.stack.cast(),
                targets: e.labels[..heads].iter().map(|&q| S::of(q)).collect(),
                dataset: self.spec.dataset.clone(),
            })
            .collect())
    }

    /// Writes one WSQF file per example into `dir` plus `manifest_name`, and
    /// returns the manifest records. `subset_of(i)` assigns each example.
    pub fn write(
        &self,
        dir: &Path,
        manifest_name: &str,
        subset_of: impl Fn(usize) -> Subset,
    ) -> Result<Vec<DatasetRecord>, DataError> {
        fs::create_dir_all(dir).map_err(|source| DataError::Io { path: dir.display().to_string(), source })?;
        let mut records = Vec::with_capacity(self.examples.len());
        for (i, e) in self.examples.iter().enumerate() {
            let file = format!("{}.wsqf", e.id);
            save_feature_stack(&e.stack, dir.join(&file))
                .map_err(|source| DataError::Feature { context: e.id.clone(), source })?;
            let mut labels = [None; 5];
            for (slot, &q) in labels.iter_mut().zip(&e.labels) {
                *slot = Some(q);
            }
            records.push(DatasetRecord {
                id: e.id.clone(),
                feature_path: file.into(),
                labels,
                scale: Scale::Normalized,
                dataset: self.spec.dataset.clone(),
                subset: subset_of(i),
            });
        }
        let path = dir.join(manifest_name);
        let out = fs::File::create(&path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
        write_manifest(&records, out).map_err(|source| DataError::Csv { path: path.display().to_string(), source })?;
        Ok(records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::spearman;

    fn spec(noise: f64) -> SynthSpec {
        SynthSpec::new(64, StackDims::new(3, 8, 4), noise, 11)
    }

    #[test]
    fn noiseless_labels_equal_planted_function() {
        let ds = spec(0.0).generate().unwrap();
        for e in &ds.examples {
            assert_eq!(e.labels[0], SynthSpec::planted_label(e.latents[0]));
        }
        let latents: Vec<f64> = ds.examples.iter().map(|e| e.latents[0]).collect();
        let labels: Vec<f64> = ds.examples.iter().map(|e| e.labels[0]).collect();
        assert_eq!(spearman(&latents, &labels).unwrap(), 1.0);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(spec(0.05).generate().unwrap(), spec(0.05).generate().unwrap());
        let mut other = spec(0.05);
        other.seed = 12;
        assert_ne!(spec(0.05).generate().unwrap(), other.generate().unwrap());
    }

    #[test]
    fn noisy_labels_stay_in_range() {
        let mut s = spec(0.3);
        s.n = 500;
        let ds = s.generate().unwrap();
        assert!(ds.examples.iter().all(|e| (0.2..=1.0).contains(&e.labels[0])));
    }

    #[test]
    fn secondary_labels_correlate() {
        let mut s = spec(0.0).with_dimensions(5);
        s.n = 400;
        let ds = s.generate().unwrap();
        let mos: Vec<f64> = ds.examples.iter().map(|e| e.labels[0]).collect();
        for k in 1..5 {
            let other: Vec<f64> = ds.examples.iter().map(|e| e.labels[k]).collect();
            let r = spearman(&mos, &other).unwrap();
            assert!(r > 0.3 && r < 0.95, "dimension {k}: r = {r}");
        }
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(0.0);
        s.n = 0;
        assert!(s.generate().is_err());
        let s = SynthSpec::new(4, StackDims::new(0, 1, 1), 0.0, 0);
        assert!(matches!(s.generate(), Err(DataError::InvalidSynthSpec(_))));
    }
}
