//! Reduce-on-plateau learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub factor: f64,
    pub patience: usize,
    /// Relative improvement required to reset the counter.
    pub threshold: f64,
    pub min_lr: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            factor: 0.5,
            patience: 10,
            threshold: 1e-4,
            min_lr: 1e-6,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(Error::Config(format!("scheduler factor {} not in (0, 1)", self.factor)));
        }
        if !(self.threshold >= 0.0) || !(self.min_lr >= 0.0) {
            return Err(Error::Config("scheduler threshold and min_lr must be non-negative".into()));
        }
        Ok(())
    }
}

/// Tracks the best validation loss and the number of epochs since it
/// last improved.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub config: SchedulerConfig,
    pub lr: f64,
    pub best: Option<f64>,
    pub bad_epochs: usize,
    pub reductions: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, config: SchedulerConfig) -> Self {
        PlateauScheduler {
            config,
            lr: lr.max(config.min_lr),
            best: None,
            bad_epochs: 0,
            reductions: 0,
        }
    }

    /// Feeds one epoch's validation loss; returns the learning rate for the
    /// next epoch.
    pub fn step(&mut self, val_loss: f64) -> f64 {
        let improved = match self.best {
            None => true,
            Some(b) => val_loss < b * (1.0 - self.config.threshold),
        };
        if improved {
            self.best = Some(val_loss);
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
        }
        if self.bad_epochs >= self.config.patience.max(1) {
            let next = (self.lr * self.config.factor).max(self.config.min_lr);
            if next < self.lr {
                self.reductions += 1;
            }
            self.lr = next;
            self.bad_epochs = 0;
        }
        self.lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_loss_keeps_lr() {
        let mut s = PlateauScheduler::new(5e-4, SchedulerConfig::default());
        for e in 0..200 {
            assert_eq!(s.step(1.0 / (e + 1) as f64), 5e-4);
        }
    }

    #[test]
    fn flat_loss_halves_at_epoch_eleven() {
        let mut s = PlateauScheduler::new(5e-4, SchedulerConfig::default());
        let lrs: Vec<f64> = (0..11).map(|_| s.step(1.0)).collect();
        assert!(lrs[..10].iter().all(|&l| l == 5e-4));
        assert_eq!(lrs[10], 2.5e-4);
        assert_eq!(s.reductions, 1);
        // Ten more flat epochs before the next halving.
        let lrs: Vec<f64> = (0..10).map(|_| s.step(1.0)).collect();
        assert_eq!(lrs[8], 2.5e-4);
        assert_eq!(lrs[9], 1.25e-4);
    }

    #[test]
    fn lr_is_clamped() {
        let mut s = PlateauScheduler::new(5e-4, SchedulerConfig::default());
        for _ in 0..10_000 {
            assert!(s.step(1.0) >= 1e-6);
        }
        assert_eq!(s.lr, 1e-6);
    }

    #[test]
    fn tiny_improvements_count_as_flat() {
        let mut s = PlateauScheduler::new(1.0, SchedulerConfig::default());
        s.step(1.0);
        s.step(1.0 - 1e-6);
        assert_eq!(s.bad_epochs, 1);
        s.step(0.5);
        assert_eq!(s.bad_epochs, 0);
    }
}
