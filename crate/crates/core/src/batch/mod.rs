//! Training-data plane: elevation curriculum and epoch planning.

mod curriculum;
mod sampler;

use thiserror::Error;

pub use curriculum::{accept_sample, rejection_prob, CurriculumConfig};
pub use sampler::{
    build_epoch_plan, EpochPlan, PlanBatch, PlanEntry, SamplerConfig, SyntheticPoolState, MAX_REJECTIONS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BatchError {
    #[error("|delta_theta| = {value} exceeds the curriculum maximum {max}")]
    DeltaThetaOutOfRange { value: f64, max: f64 },
    #[error("invalid batch config: {0}")]
    InvalidConfig(String),
    #[error("manifest has no real records")]
    NoRealRecords,
    #[error("pool state does not match the manifest: {0}")]
    InconsistentState(String),
    #[error("malformed plan: {0}")]
    InvalidPlan(String),
}
