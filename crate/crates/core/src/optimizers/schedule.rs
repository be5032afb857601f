use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decay {
    Cosine,
    Linear,
    Constant,
}

impl std::str::FromStr for Decay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Decay::Cosine),
            "linear" => Ok(Decay::Linear),
            "constant" => Ok(Decay::Constant),
            other => Err(Error::invalid("decay", format!("expected cosine, linear or constant, got `{other}`"))),
        }
    }
}

/// Linear warmup from 0 to `peak_lr`, then the chosen decay down to step
/// `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    pub warmup_steps: u64,
    pub peak_lr: f64,
    pub decay: Decay,
    pub total_steps: u64,
}

impl ScheduleConfig {
    pub fn new(warmup_steps: u64, peak_lr: f64, decay: Decay, total_steps: u64) -> Result<Self> {
        let s = Self { warmup_steps, peak_lr, decay, total_steps };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(lr: f64, total_steps: u64) -> Result<Self> {
        Self::new(0, lr, Decay::Constant, total_steps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return Err(Error::invalid("peak_lr", "must be positive"));
        }
        if self.total_steps == 0 {
            return Err(Error::invalid("total_steps", "must be positive"));
        }
        if self.warmup_steps > self.total_steps {
            return Err(Error::invalid("warmup_steps", "must not exceed total_steps"));
        }
        Ok(())
    }

    pub fn lr_at(&self, t: u64) -> Result<f64> {
        if t > self.total_steps {
            return Err(Error::invalid("t", format!("step {t} beyond total_steps {}", self.total_steps)));
        }
        if t < self.warmup_steps {
            return Ok(self.peak_lr * t as f64 / self.warmup_steps as f64);
        }
        let span = self.total_steps - self.warmup_steps;
        if span == 0 {
            return Ok(self.peak_lr);
        }
        let tau = (t - self.warmup_steps) as f64 / span as f64;
        Ok(match self.decay {
            Decay::Cosine => self.peak_lr * 0.5 * (1.0 + (std::f64::consts::PI * tau).cos()),
            Decay::Linear => self.peak_lr * (1.0 - tau),
            Decay::Constant => self.peak_lr,
        })
    }
}

pub fn lr_at(sched: &ScheduleConfig, t: u64) -> Result<f64> {
    sched.lr_at(t)
}
