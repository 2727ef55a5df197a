use std::io::Write;

use super::adam::adam_update;
use super::checkpoint::{Checkpoint, TrainState};
use super::schedule::warmup_lr;
use super::{LossKind, TrainConfig, TrainError};
use crate::data::{make_batches, Example};
use crate::model::{backward, forward_with_cache, ArchConfig, ModelParams};
use crate::objectives::{BatchLoss, DatasetSizes};
use crate::Real;

/// One row of the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    /// Learning rate of the epoch's last update.
    pub lr: f64,
    /// Mean of the epoch's batch losses.
    pub train_loss: f64,
    pub val_loss: f64,
    pub is_best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Learning rate of every update made by this run, in order.
    pub step_lrs: Vec<f64>,
    pub best_epoch: Option<u64>,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.epochs.iter().filter(|r| r.is_best).map(|r| r.val_loss).next_back()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "lr", "train_loss", "val_loss", "is_best"])?;
        for r in &self.epochs {
            w.write_record([
                r.epoch.to_string(),
                format!("{:e}", r.lr),
                r.train_loss.to_string(),
                r.val_loss.to_string(),
                (r.is_best as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub struct TrainOutcome<S> {
    pub checkpoint: Checkpoint<S>,
    pub report: TrainReport,
}

impl<S: Real> TrainOutcome<S> {
    pub fn best_params(&self) -> &ModelParams<S> {
        self.checkpoint.best_params()
    }
}

/// Resumable training loop.
pub struct Trainer<S> {
    arch: ArchConfig,
    config: TrainConfig,
    params: ModelParams<S>,
    state: TrainState<S>,
    history: Vec<EpochRecord>,
}

impl<S: Real> Trainer<S> {
    pub fn new(arch: ArchConfig, config: TrainConfig, params: ModelParams<S>) -> Result<Self, TrainError> {
        arch.validate()?;
        config.validate()?;
        if params.param_count() != ModelParams::<S>::zeros(&arch).param_count() {
            return Err(TrainError::ShapeMismatch {
                params: params.param_count(),
                grads: ModelParams::<S>::zeros(&arch).param_count(),
                moments: params.param_count(),
            });
        }
        let state = TrainState::new(&config, params.param_count());
        Ok(Self { arch, config, params, state, history: Vec::new() })
    }

    pub fn from_checkpoint(c: Checkpoint<S>) -> Self {
        Self { arch: c.arch, config: c.config, params: c.params, state: c.state, history: c.history }
    }

    /// Changes the epoch budget, e.g. to continue a resumed run further.
    pub fn set_max_epochs(&mut self, max_epochs: u64) {
        self.config.max_epochs = max_epochs;
    }

    pub fn params(&self) -> &ModelParams<S> {
        &self.params
    }

    pub fn state(&self) -> &TrainState<S> {
        &self.state
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    pub fn is_finished(&self) -> bool {
        self.state.stopped || self.state.epoch >= self.config.max_epochs
    }

    pub fn checkpoint(&self) -> Checkpoint<S> {
        Checkpoint {
            arch: self.arch.clone(),
            config: self.config.clone(),
            params: self.params.clone(),
            state: self.state.clone(),
            history: self.history.clone(),
        }
    }

    pub fn into_checkpoint(self) -> Checkpoint<S> {
        Checkpoint { arch: self.arch, config: self.config, params: self.params, state: self.state, history: self.history }
    }

    /// Trains until early stopping fires or `max_epochs` is reached.
    pub fn run(&mut self, train: &[Example<S>], val: &[Example<S>]) -> Result<TrainReport, TrainError> {
        self.run_with(train, val, |_| {})
    }

    /// Like [`Trainer::run`], calling `on_epoch` after every finished epoch.
    pub fn run_with(
        &mut self,
        train: &[Example<S>],
        val: &[Example<S>],
        mut on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<TrainReport, TrainError> {
        if train.is_empty() {
            return Err(TrainError::EmptyTrainSet);
        }
        if val.is_empty() {
            return Err(TrainError::EmptyValidationSet);
        }
        let sizes = DatasetSizes::from_tags(train.iter().map(|e| e.dataset.as_str()));
        let mut step_lrs = Vec::new();
        while !self.is_finished() {
            let record = self.run_epoch(train, val, &sizes, &mut step_lrs)?;
            on_epoch(&record);
            self.history.push(record);
        }
        Ok(TrainReport {
            epochs: self.history.clone(),
            step_lrs,
            best_epoch: self.state.best_epoch,
            stopped_early: self.state.stopped,
        })
    }

    fn run_epoch(
        &mut self,
        train: &[Example<S>],
        val: &[Example<S>],
        sizes: &DatasetSizes,
        step_lrs: &mut Vec<f64>,
    ) -> Result<EpochRecord, TrainError> {
        let epoch = self.state.epoch;
        let batches = make_batches(train.len(), self.config.batch_size, self.config.seed, epoch)?;
        let heads = self.arch.head_count();
        let mut grads = self.params.zeros_like();
        let mut loss_sum = 0.0;
        let mut lr = self.state.plateau.lr;

        for (b, batch) in batches.iter().enumerate() {
            lr = if epoch == 0 { warmup_lr(b, batches.len(), self.config.lr_init)? } else { self.state.plateau.lr };
            let loss = match self.config.loss {
                LossKind::Mse => BatchLoss::mse(batch.len(), heads),
                LossKind::BiasAware => {
                    let tags: Vec<&str> = batch.iter().map(|&i| train[i].dataset.as_str()).collect();
                    BatchLoss::bias_aware(&tags, sizes, heads)?
                }
            };
            grads.fill(S::zero());
            let mut sum = S::zero();
            for (k, &i) in batch.iter().enumerate() {
                let ex = &train[i];
                let cache = forward_with_cache(&ex.stack, &self.params, &self.arch)?;
                let upstream = loss.accumulate(k, &cache.scores(), &ex.targets, &mut sum);
                backward(&ex.stack, &self.params, &self.arch, &cache, &upstream, &mut grads)?;
            }
            let value = loss.finish(sum).to_f64().unwrap_or(f64::NAN);
            if !value.is_finite() || !grads.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: b, lr });
            }
            adam_update(&mut self.params, &grads, &mut self.state.adam, lr)?;
            self.state.global_step += 1;
            step_lrs.push(lr);
            loss_sum += value;
        }

        let val_loss = evaluate_loss(val, &self.params, &self.arch)?;
        if !val_loss.is_finite() {
            return Err(TrainError::NonFiniteValidation { epoch });
        }
        let (improved, stop) = self.state.early.observe(val_loss);
        self.state.plateau.step(val_loss);
        if improved {
            self.state.best_params = Some(self.params.clone());
            self.state.best_epoch = Some(epoch);
        }
        self.state.stopped = stop;
        self.state.epoch += 1;
        Ok(EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / batches.len() as f64,
            val_loss,
            is_best: improved,
        })
    }
}

/// Trains a fresh model to completion.
pub fn train<S: Real>(
    arch: ArchConfig,
    config: TrainConfig,
    params: ModelParams<S>,
    train: &[Example<S>],
    val: &[Example<S>],
) -> Result<TrainOutcome<S>, TrainError> {
    let mut trainer = Trainer::new(arch, config, params)?;
    let report = trainer.run(train, val)?;
    Ok(TrainOutcome { checkpoint: trainer.into_checkpoint(), report })
}

/// Head scores for every example, in input order.
pub fn predict_all<S: Real>(
    examples: &[Example<S>],
    params: &ModelParams<S>,
    arch: &ArchConfig,
) -> Result<Vec<Vec<S>>, TrainError> {
    examples
        .iter()
        .map(|e| Ok(forward_with_cache(&e.stack, params, arch)?.scores()))
        .collect()
}

/// Unweighted mean squared error over examples and heads.
pub fn evaluate_loss<S: Real>(
    examples: &[Example<S>],
    params: &ModelParams<S>,
    arch: &ArchConfig,
) -> Result<f64, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyValidationSet);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (pred, e) in predict_all(examples, params, arch)?.iter().zip(examples) {
        for (p, t) in pred.iter().zip(&e.targets) {
            let d = p.to_f64().unwrap_or(f64::NAN) - t.to_f64().unwrap_or(f64::NAN);
            sum += d * d;
            count += 1;
        }
    }
    Ok(sum / count as f64)
}
