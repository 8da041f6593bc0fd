//! File-driven pipeline stages: calibrate → synthesize → plan, plus
//! evaluation and loss checks.
//!
//! Every stage reads its inputs from disk, writes its outputs into the
//! configured output directory and is a pure function of (input files,
//! config, seed). Relative paths in a config file resolve against the file's
//! directory; relative paths inside a manifest resolve against the manifest's
//! directory.

mod calibrate;
mod evaluate;
mod losses_check;
mod plan;
mod synthesize;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calibrate::{run_calibrate, CalibrationReport, CalibrationRow, CALIBRATION_FILE};
pub use evaluate::{run_evaluate, EVAL_FILE};
pub use losses_check::{losses_check, parse_loss_inputs, LossInputs, LossReport};
pub use plan::{plan_file, run_plan, state_file, PlanOutput};
pub use synthesize::{run_synthesize, SynthesisSummary, SYNTHETIC_DIR, SYNTHETIC_MANIFEST};

use crate::assets::{load_mesh, normalize_mesh, AssetError, DatasetManifest, TexturedMesh, UpAxis};
use crate::batch::{BatchError, CurriculumConfig, SamplerConfig};
use crate::calibration::CalibrationConfig;
use crate::losses::{LossConfig, LossError};
use crate::metrics::{MetricsConfig, MetricsError};
use crate::synthesis::{Direction, PerturbationConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error(transparent)]
    Batch(#[from] BatchError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl PipelineError {
    /// Process exit code: 1 for invalid input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_)
            | PipelineError::Validation(_)
            | PipelineError::Batch(_)
            | PipelineError::Loss(_)
            | PipelineError::Asset(AssetError::Manifest { .. }) => 1,
            PipelineError::Metrics(e) => match e {
                MetricsError::Io { .. } => 2,
                _ => 1,
            },
            PipelineError::Asset(_) | PipelineError::Io { .. } | PipelineError::Runtime(_) => 2,
        }
    }
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    fs::write(path, contents).map_err(io_error(path))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub source_manifest: Option<PathBuf>,
    pub background_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub up_axis: UpAxis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub direction: Direction,
    /// Synthesized views per accepted source row.
    pub views: usize,
    pub feather_radius: u32,
    pub delta_theta_max: f64,
    pub delta_phi_max: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        let p = PerturbationConfig::default();
        Self {
            direction: Direction::GroundToAerial,
            views: 4,
            feather_radius: 2,
            delta_theta_max: p.delta_theta_max,
            delta_phi_max: p.delta_phi_max,
        }
    }
}

impl SynthesisConfig {
    pub fn perturbation(&self) -> PerturbationConfig {
        PerturbationConfig {
            delta_theta_max: self.delta_theta_max,
            delta_phi_max: self.delta_phi_max,
        }
    }
}

/// Batch shape; the planner's seed is the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub identities_per_batch: usize,
    pub instances_per_identity: usize,
    pub real_per_identity: usize,
    pub synthetic_per_identity: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            identities_per_batch: d.identities_per_batch,
            instances_per_identity: d.instances_per_identity,
            real_per_identity: d.real_per_identity,
            synthetic_per_identity: d.synthetic_per_identity,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub mesh: MeshConfig,
    pub calibration: CalibrationConfig,
    pub synthesis: SynthesisConfig,
    pub sampler: SamplerSettings,
    pub curriculum: CurriculumConfig,
    pub losses: LossConfig,
    pub metrics: MetricsConfig,
}

impl PipelineConfig {
    /// Parse TOML and resolve relative paths against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        for p in [
            &mut cfg.paths.source_manifest,
            &mut cfg.paths.background_dir,
            &mut cfg.paths.output_dir,
        ] {
            if let Some(path) = p.as_mut() {
                if path.is_relative() {
                    *path = base_dir.join(&*path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let cfg_err = |e: &dyn std::fmt::Display| PipelineError::Config(e.to_string());
        self.calibration.validate().map_err(|e| cfg_err(&e))?;
        self.synthesis.perturbation().validate().map_err(|e| cfg_err(&e))?;
        if self.synthesis.views == 0 {
            return Err(PipelineError::Config("synthesis.views must be at least 1".into()));
        }
        self.sampler_config().validate().map_err(|e| cfg_err(&e))?;
        self.curriculum.validate().map_err(|e| cfg_err(&e))?;
        if self.synthesis.delta_theta_max > self.curriculum.delta_theta_max {
            return Err(PipelineError::Config(
                "synthesis.delta_theta_max exceeds curriculum.delta_theta_max".into(),
            ));
        }
        self.losses.validate().map_err(|e| cfg_err(&e))?;
        if self.metrics.max_rank == 0 {
            return Err(PipelineError::Config("metrics.max_rank must be at least 1".into()));
        }
        Ok(())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            identities_per_batch: self.sampler.identities_per_batch,
            instances_per_identity: self.sampler.instances_per_identity,
            real_per_identity: self.sampler.real_per_identity,
            synthetic_per_identity: self.sampler.synthetic_per_identity,
            seed: self.seed,
        }
    }

    pub fn output_dir(&self) -> Result<&Path, PipelineError> {
        self.paths
            .output_dir
            .as_deref()
            .ok_or_else(|| PipelineError::Config("paths.output_dir is not set".into()))
    }

    pub fn source_manifest_path(&self) -> Result<&Path, PipelineError> {
        self.paths
            .source_manifest
            .as_deref()
            .ok_or_else(|| PipelineError::Config("paths.source_manifest is not set".into()))
    }

    pub(crate) fn load_manifest(&self, path: &Path) -> Result<DatasetManifest, PipelineError> {
        if !path.exists() {
            return Err(PipelineError::Validation(format!("manifest {} does not exist", path.display())));
        }
        Ok(DatasetManifest::load(path, self.curriculum.delta_theta_max)?)
    }
}

/// Resolve a manifest entry against the manifest's directory.
pub(crate) fn resolve(base: &Path, entry: &str) -> PathBuf {
    let p = Path::new(entry);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub(crate) fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

/// Load, reorient and normalize a mesh exactly as calibration saw it.
pub(crate) fn load_normalized_mesh(path: &Path, up: UpAxis) -> Result<TexturedMesh, AssetError> {
    normalize_mesh(&load_mesh(path)?.to_z_up(up))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let back = PipelineConfig::from_toml(&cfg.to_toml(), Path::new("/")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.sampler_config().identities_per_batch, 32);
        assert_eq!((cfg.calibration.width, cfg.calibration.height), (256, 512));
    }

    #[test]
    fn sections_override_defaults_and_paths_resolve() {
        let text = r#"
seed = 9
[paths]
source_manifest = "data/manifest.jsonl"
output_dir = "/abs/out"
[synthesis]
direction = "a2g"
views = 2
[sampler]
identities_per_batch = 2
[curriculum]
warmup_epochs = 5
[metrics]
distance = "euclidean"
"#;
        let cfg = PipelineConfig::from_toml(text, Path::new("/base")).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.paths.source_manifest.as_deref(), Some(Path::new("/base/data/manifest.jsonl")));
        assert_eq!(cfg.paths.output_dir.as_deref(), Some(Path::new("/abs/out")));
        assert_eq!(cfg.synthesis.direction, Direction::AerialToGround);
        assert_eq!(cfg.synthesis.views, 2);
        assert_eq!(cfg.sampler_config().seed, 9);
        assert_eq!(cfg.curriculum.warmup_epochs, 5);
        assert_eq!(cfg.metrics.distance, crate::metrics::DistanceMetric::Euclidean);
        assert_eq!(cfg.calibration, CalibrationConfig::default());
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(PipelineConfig::from_toml("bogus = 1", Path::new(".")).is_err());
        assert!(PipelineConfig::from_toml("[sampler]\nk = 1", Path::new(".")).is_err());
        let mut cfg = PipelineConfig::default();
        cfg.synthesis.views = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.sampler.instances_per_identity = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.synthesis.delta_theta_max = 40.0;
        assert!(cfg.validate().is_err());
        assert_eq!(PipelineError::Config("x".into()).exit_code(), 1);
        assert_eq!(PipelineError::Runtime("x".into()).exit_code(), 2);
    }
}
