//! Learning-rate warmup, plateau decay and early stopping.

use super::TrainError;

/// Learning rate during the warmup epoch: a linear ramp that reaches
/// `lr_init` on the last update of the epoch.
pub fn warmup_lr(step: usize, steps_per_epoch: usize, lr_init: f64) -> Result<f64, TrainError> {
    if steps_per_epoch == 0 {
        return Err(TrainError::InvalidConfig("steps_per_epoch must be positive".into()));
    }
    if step >= steps_per_epoch {
        return Ok(lr_init);
    }
    Ok(lr_init * (step + 1) as f64 / steps_per_epoch as f64)
}

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// epochs without a strict decrease of the best validation loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub best: f64,
    pub since_improvement: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, factor: f64, patience: usize) -> Self {
        Self { lr, factor, patience, best: f64::INFINITY, since_improvement: 0 }
    }

    /// Records one epoch's validation loss; returns `true` if the rate dropped.
    pub fn step(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.since_improvement = 0;
            return false;
        }
        self.since_improvement += 1;
        if self.since_improvement >= self.patience {
            self.lr *= self.factor;
            self.since_improvement = 0;
            return true;
        }
        false
    }
}

/// Signals a stop once `patience` consecutive epochs pass without a new best.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub since_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, since_improvement: 0 }
    }

    /// Records one epoch's validation loss; returns `(improved, stop)`.
    pub fn observe(&mut self, val_loss: f64) -> (bool, bool) {
        if val_loss < self.best {
            self.best = val_loss;
            self.since_improvement = 0;
            return (true, false);
        }
        self.since_improvement += 1;
        (false, self.since_improvement >= self.patience)
    }
}

/// Convenience wrapper over [`PlateauScheduler::step`].
pub fn plateau_step(state: &mut PlateauScheduler, val_loss: f64) -> bool {
    state.step(val_loss)
}

/// Convenience wrapper over [`EarlyStopping::observe`]; returns the stop flag.
pub fn early_stop(state: &mut EarlyStopping, val_loss: f64) -> bool {
    state.observe(val_loss).1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_ramp() {
        assert_eq!(warmup_lr(99, 100, 1e-5).unwrap(), 1e-5);
        assert!((warmup_lr(0, 100, 1e-5).unwrap() - 1e-7).abs() < 1e-20);
        assert!((warmup_lr(49, 100, 1e-5).unwrap() - 5e-6).abs() < 1e-20);
        assert!(warmup_lr(0, 0, 1e-5).is_err());
    }

    #[test]
    fn plateau_drops_on_fifteenth_bad_epoch() {
        let mut p = PlateauScheduler::new(1e-5, 0.1, 15);
        p.step(1.0);
        for i in 1..=16 {
            let dropped = p.step(1.1);
            assert_eq!(dropped, i == 15, "epoch {i}");
            let expected = if i >= 15 { 1e-5 * 0.1 } else { 1e-5 };
            assert_eq!(p.lr, expected);
            assert!(p.since_improvement <= p.patience);
        }
    }

    #[test]
    fn plateau_never_drops_while_improving() {
        let mut p = PlateauScheduler::new(1e-5, 0.1, 15);
        for i in 0..100 {
            assert!(!p.step(1.0 / (i + 1) as f64));
        }
        assert_eq!(p.lr, 1e-5);
    }

    #[test]
    fn two_plateaus() {
        let mut p = PlateauScheduler::new(1e-5, 0.1, 15);
        p.step(1.0);
        let drops: usize = (0..30).map(|_| p.step(2.0) as usize).sum();
        assert_eq!(drops, 2);
        assert_eq!(p.lr, 1e-5 * 0.1 * 0.1);
    }

    #[test]
    fn early_stop_after_twenty() {
        let mut e = EarlyStopping::new(20);
        assert!(!early_stop(&mut e, 1.0));
        for i in 1..=20 {
            assert_eq!(early_stop(&mut e, 1.1), i == 20);
        }
    }

    #[test]
    fn early_stop_resets_on_improvement() {
        let mut e = EarlyStopping::new(20);
        e.observe(1.0);
        for _ in 0..18 {
            assert!(!early_stop(&mut e, 1.5));
        }
        assert!(!early_stop(&mut e, 0.9));
        for _ in 0..19 {
            assert!(!early_stop(&mut e, 1.5));
        }
        assert!(early_stop(&mut e, 1.5));
    }

    #[test]
    fn equal_loss_is_not_an_improvement() {
        let mut e = EarlyStopping::new(2);
        e.observe(0.5);
        assert_eq!(e.observe(0.5), (false, false));
        assert_eq!(e.observe(0.5), (false, true));
    }
}
