use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear warmup followed by step decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
}

impl Default for LrSchedule {
    /// 0.1 with a five-epoch warmup and no decay steps.
    fn default() -> Self {
        Self {
            base_lr: 0.1,
            warmup_epochs: 5,
            decay_epochs: Vec::new(),
            decay_factor: 0.1,
        }
    }
}

impl LrSchedule {
    pub fn constant(base_lr: f64) -> Self {
        Self {
            base_lr,
            warmup_epochs: 0,
            decay_epochs: Vec::new(),
            decay_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return Err(Error::invalid(
                "base_lr",
                format!("must be positive, got {}", self.base_lr),
            ));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::invalid(
                "decay_factor",
                format!("must lie in (0, 1], got {}", self.decay_factor),
            ));
        }
        if self.decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "decay_epochs",
                "must be strictly increasing",
            ));
        }
        Ok(())
    }

    /// Learning rate for a 1-based epoch. During warmup the rate is
    /// `base * epoch / warmup`; every decay epoch already reached multiplies it
    /// by `decay_factor`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let epoch = epoch.max(1);
        let ramp = if self.warmup_epochs > 0 && epoch < self.warmup_epochs {
            epoch as f64 / self.warmup_epochs as f64
        } else {
            1.0
        };
        let decays = self.decay_epochs.iter().filter(|&&d| epoch >= d).count();
        self.base_lr * ramp * self.decay_factor.powi(decays as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn warmup_then_decay() -> LrSchedule {
        LrSchedule {
            base_lr: 0.1,
            warmup_epochs: 5,
            decay_epochs: vec![60, 80],
            decay_factor: 0.1,
        }
    }

    #[test]
    fn warmup_ramp() {
        let s = warmup_then_decay();
        assert_relative_eq!(s.lr_at(1), 0.02, max_relative = 1e-15);
        assert_relative_eq!(s.lr_at(3), 0.06, max_relative = 1e-15);
        assert_eq!(s.lr_at(5), 0.1);
        assert_eq!(s.lr_at(59), 0.1);
    }

    #[test]
    fn step_decay() {
        let s = warmup_then_decay();
        assert_relative_eq!(s.lr_at(60), 0.01, max_relative = 1e-15);
        assert_relative_eq!(s.lr_at(85), 0.001, max_relative = 1e-14);
    }

    #[test]
    fn validation() {
        assert!(warmup_then_decay().validate().is_ok());
        let mut bad = warmup_then_decay();
        bad.decay_epochs = vec![80, 60];
        assert!(bad.validate().is_err());
        assert!(LrSchedule::constant(0.0).validate().is_err());
    }
}
