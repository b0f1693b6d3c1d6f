//! Epoch-indexed curriculum schedules.
//!
//! Two ramps are provided: a linear ramp for the standard deviation of the
//! Gaussian input noise and a square-root ramp for the dropout rate. Both
//! start at zero on epoch 0, reach their maximum at `e_max` and stay there.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Epoch at which both schedules saturate unless configured otherwise.
pub const DEFAULT_E_MAX: u32 = 25;
pub const DEFAULT_SIGMA_MAX: f64 = 0.3;
pub const DEFAULT_DELTA_MAX: f64 = 0.25;

/// Linear ramp of the input-noise standard deviation:
/// `sigma(E) = min(sigma_max, sigma_max * E / e_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub sigma_max: f64,
    pub e_max: u32,
}

/// Square-root ramp of the dropout rate:
/// `delta(E) = min(delta_max, delta_max * sqrt(E / e_max))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSchedule {
    pub delta_max: f64,
    pub e_max: u32,
}

impl NoiseSchedule {
    pub fn new(sigma_max: f64, e_max: u32) -> Result<Self> {
        let s = Self { sigma_max, e_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_max.is_finite() && self.sigma_max >= 0.0) {
            return Err(Error::Config(format!(
                "sigma_max must be finite and >= 0, got {}",
                self.sigma_max
            )));
        }
        if self.e_max == 0 {
            return Err(Error::Config("noise e_max must be >= 1".into()));
        }
        Ok(())
    }

    pub fn sigma_at(&self, epoch: u32) -> f64 {
        if epoch >= self.e_max {
            return self.sigma_max;
        }
        (self.sigma_max * epoch as f64 / self.e_max as f64).min(self.sigma_max)
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            sigma_max: DEFAULT_SIGMA_MAX,
            e_max: DEFAULT_E_MAX,
        }
    }
}

impl DropoutSchedule {
    pub fn new(delta_max: f64, e_max: u32) -> Result<Self> {
        let s = Self { delta_max, e_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_max >= 0.0 && self.delta_max < 1.0) {
            return Err(Error::Config(format!(
                "delta_max must lie in [0, 1), got {}",
                self.delta_max
            )));
        }
        if self.e_max == 0 {
            return Err(Error::Config("dropout e_max must be >= 1".into()));
        }
        Ok(())
    }

    pub fn delta_at(&self, epoch: u32) -> f64 {
        if epoch >= self.e_max {
            return self.delta_max;
        }
        (self.delta_max * (epoch as f64 / self.e_max as f64).sqrt()).min(self.delta_max)
    }
}

impl Default for DropoutSchedule {
    fn default() -> Self {
        Self {
            delta_max: DEFAULT_DELTA_MAX,
            e_max: DEFAULT_E_MAX,
        }
    }
}

/// Anything that maps an epoch index to a curriculum value.
pub trait Schedule {
    fn value_at(&self, epoch: u32) -> f64;
}

impl Schedule for NoiseSchedule {
    fn value_at(&self, epoch: u32) -> f64 {
        self.sigma_at(epoch)
    }
}

impl Schedule for DropoutSchedule {
    fn value_at(&self, epoch: u32) -> f64 {
        self.delta_at(epoch)
    }
}

/// One `(epoch, value)` row per epoch in `0..=total_epochs`.
pub fn schedule_table<S: Schedule + ?Sized>(schedule: &S, total_epochs: u32) -> Vec<(u32, f64)> {
    (0..=total_epochs).map(|e| (e, schedule.value_at(e))).collect()
}

/// How input noise is applied over training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum NoiseMode {
    Scheduled(NoiseSchedule),
    Fixed { sigma: f64 },
    Off,
}

/// How dropout is applied over training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DropoutMode {
    Scheduled(DropoutSchedule),
    Fixed { delta: f64 },
    Off,
}

impl NoiseMode {
    pub fn sigma_at(&self, epoch: u32) -> f64 {
        match self {
            NoiseMode::Scheduled(s) => s.sigma_at(epoch),
            NoiseMode::Fixed { sigma } => *sigma,
            NoiseMode::Off => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseMode::Scheduled(s) => s.validate(),
            NoiseMode::Fixed { sigma } if !(sigma.is_finite() && *sigma >= 0.0) => Err(Error::Config(format!(
                "fixed sigma must be finite and >= 0, got {sigma}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn is_off(&self) -> bool {
        matches!(self, NoiseMode::Off)
    }
}

impl DropoutMode {
    pub fn delta_at(&self, epoch: u32) -> f64 {
        match self {
            DropoutMode::Scheduled(s) => s.delta_at(epoch),
            DropoutMode::Fixed { delta } => *delta,
            DropoutMode::Off => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DropoutMode::Scheduled(s) => s.validate(),
            DropoutMode::Fixed { delta } if !(0.0..1.0).contains(delta) => Err(Error::Config(format!(
                "fixed dropout rate must lie in [0, 1), got {delta}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn is_off(&self) -> bool {
        matches!(self, DropoutMode::Off)
    }
}

/// CSV rendering with an `epoch,value` header. Values use the shortest
/// round-trip float formatting, so parsing them back gives the exact `f64`.
pub fn table_to_csv(rows: &[(u32, f64)]) -> String {
    let mut out = String::from("epoch,value\n");
    for (epoch, value) in rows {
        let _ = writeln!(out, "{epoch},{value}");
    }
    out
}
