//! Non-intrusive speech quality prediction.
//!
//! A stack of per-layer encoder features is fused with learned layer weights,
//! projected, passed through a small pre-norm transformer and reduced by one
//! attention-pooling head per quality dimension into sigmoid scores.
//!
//! The numerical core ([`model`], [`objectives`], [`trainer`]) is generic over
//! the [`Real`] scalar type so the same code runs in 64-bit (the default, used
//! for verification) and 32-bit arithmetic. Concrete aliases for both are
//! exported below.

pub mod data;
pub mod error;
pub mod features;
pub mod model;
pub mod objectives;
pub mod scalar;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::{DType, Real};

/// Model parameters in 64-bit arithmetic.
pub type ModelParams64 = model::ModelParams<f64>;
/// Model parameters in 32-bit arithmetic.
pub type ModelParams32 = model::ModelParams<f32>;
/// Feature stack in 64-bit arithmetic.
pub type FeatureStack64 = features::FeatureStack<f64>;
/// Feature stack in 32-bit arithmetic (the on-disk precision).
pub type FeatureStack32 = features::FeatureStack<f32>;
/// Training checkpoint in 64-bit arithmetic.
pub type Checkpoint64 = trainer::Checkpoint<f64>;
/// Training checkpoint in 32-bit arithmetic.
pub type Checkpoint32 = trainer::Checkpoint<f32>;
/// Labeled example in 64-bit arithmetic.
pub type Example64 = data::Example<f64>;
/// Labeled example in 32-bit arithmetic.
pub type Example32 = data::Example<f32>;
