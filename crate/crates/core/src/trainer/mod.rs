//! Optimization: warmup epoch, Adam, plateau decay, early stopping,
//! best-epoch selection and resumable checkpoints.

mod adam;
mod checkpoint;
mod loop_;
mod schedule;

pub use adam::{adam_update, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, peek_dtype, save_checkpoint, Checkpoint, TrainState,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use loop_::{evaluate_loss, predict_all, train, EpochRecord, TrainOutcome, TrainReport, Trainer};
pub use schedule::{early_stop, plateau_step, warmup_lr, EarlyStopping, PlateauScheduler};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::model::ModelError;
use crate::objectives::ObjectiveError;
use crate::DType;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (lr {lr:e})")]
    NonFiniteLoss { epoch: u64, batch: usize, lr: f64 },
    #[error("non-finite validation loss at epoch {epoch}")]
    NonFiniteValidation { epoch: u64 },
    #[error("shape mismatch: {params} parameters, {grads} gradients, {moments} moments")]
    ShapeMismatch { params: usize, grads: usize, moments: usize },
    #[error("no training examples")]
    EmptyTrainSet,
    #[error("no validation examples")]
    EmptyValidationSet,
    #[error("bad checkpoint magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("checkpoint holds {found:?} parameters but {expected:?} were requested")]
    DtypeMismatch { expected: DType, found: DType },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    BiasAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

/// Optimization hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub early_stop_patience: usize,
    pub batch_size: usize,
    pub max_epochs: u64,
    pub seed: u64,
    pub loss: LossKind,
    /// Fraction of each dataset without predefined validation data held out for validation.
    pub val_fraction: f64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_init: 1e-5,
            plateau_factor: 0.1,
            plateau_patience: 15,
            early_stop_patience: 20,
            batch_size: 128,
            max_epochs: 200,
            seed: 0,
            loss: LossKind::BiasAware,
            val_fraction: 0.1,
            precision: Precision::F64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.lr_init.is_finite() && self.lr_init > 0.0) {
            return bad("lr_init must be positive");
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad("plateau_factor must lie in (0, 1)");
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return bad("patience values must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_recipe() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_init, 0.00001);
        assert_eq!(c.plateau_factor, 0.1);
        assert_eq!(c.plateau_patience, 15);
        assert_eq!(c.early_stop_patience, 20);
        assert_eq!(c.batch_size, 128);
        assert_eq!(c.val_fraction, 0.1);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let c = TrainConfig { plateau_factor: 1.0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
        let c = TrainConfig { early_stop_patience: 0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
    }
}
