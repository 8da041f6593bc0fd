//! Elevation curriculum: large viewpoint shifts are rejected early in
//! training and admitted progressively until the warm-up ends.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BatchError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    pub warmup_epochs: u32,
    pub delta_theta_max: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            warmup_epochs: 20,
            delta_theta_max: 30.0,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<(), BatchError> {
        if self.warmup_epochs == 0 {
            return Err(BatchError::InvalidConfig("warmup_epochs must be at least 1".into()));
        }
        if !(self.delta_theta_max > 0.0) || !self.delta_theta_max.is_finite() {
            return Err(BatchError::InvalidConfig("delta_theta_max must be positive".into()));
        }
        Ok(())
    }
}

/// `max(0, 1 − epoch/E_warmup) · |Δθ|/Δθ_max`.
pub fn rejection_prob(delta_theta: f64, epoch: u32, cfg: &CurriculumConfig) -> Result<f64, BatchError> {
    cfg.validate()?;
    if !delta_theta.is_finite() || delta_theta.abs() > cfg.delta_theta_max {
        return Err(BatchError::DeltaThetaOutOfRange {
            value: delta_theta,
            max: cfg.delta_theta_max,
        });
    }
    let warm = (1.0 - f64::from(epoch) / f64::from(cfg.warmup_epochs)).max(0.0);
    Ok(warm * delta_theta.abs() / cfg.delta_theta_max)
}

/// Draw `u ~ U[0, 1)` and accept when `u ≥ rejection_prob`.
pub fn accept_sample<R: Rng + ?Sized>(
    rng: &mut R,
    delta_theta: f64,
    epoch: u32,
    cfg: &CurriculumConfig,
) -> Result<bool, BatchError> {
    let p = rejection_prob(delta_theta, epoch, cfg)?;
    Ok(rng.gen::<f64>() >= p)
}
