//! `plan`: build one epoch plan from the combined real + synthetic manifest.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use super::{io_error, write_file, PipelineConfig, PipelineError, SYNTHETIC_MANIFEST};
use crate::assets::DatasetManifest;
use crate::batch::{build_epoch_plan, EpochPlan, SyntheticPoolState};

pub fn plan_file(out_dir: &Path, epoch: u32) -> PathBuf {
    out_dir.join(format!("plan_epoch_{epoch}.jsonl"))
}

pub fn state_file(out_dir: &Path, epoch: u32) -> PathBuf {
    out_dir.join(format!("pool_state_epoch_{epoch}.json"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutput {
    pub plan: EpochPlan,
    pub state: SyntheticPoolState,
    pub plan_path: PathBuf,
    pub state_path: PathBuf,
}

fn combined_manifest(cfg: &PipelineConfig, out_dir: &Path) -> Result<DatasetManifest, PipelineError> {
    let source = cfg.load_manifest(cfg.source_manifest_path()?)?;
    let synthetic_path = out_dir.join(SYNTHETIC_MANIFEST);
    if !synthetic_path.exists() {
        return Ok(source);
    }
    let synthetic = cfg.load_manifest(&synthetic_path)?;
    Ok(source.merged(&synthetic, cfg.curriculum.delta_theta_max)?)
}

/// Plan `epoch` and write the plan and the outgoing pool state.
///
/// The manifest defaults to the source manifest merged with the synthetic
/// manifest in the output directory. The incoming pool state defaults to the
/// previous epoch's state file when it exists and to fresh pools otherwise.
pub fn run_plan(
    cfg: &PipelineConfig,
    epoch: u32,
    manifest_override: Option<&Path>,
    state_override: Option<&Path>,
) -> Result<PlanOutput, PipelineError> {
    cfg.validate()?;
    let out_dir = cfg.output_dir()?;
    let manifest = match manifest_override {
        Some(path) => cfg.load_manifest(path)?,
        None => combined_manifest(cfg, out_dir)?,
    };
    let state_path = match state_override {
        Some(p) => Some(p.to_path_buf()),
        None => epoch
            .checked_sub(1)
            .map(|prev| state_file(out_dir, prev))
            .filter(|p| p.exists()),
    };
    let state = match &state_path {
        Some(p) => SyntheticPoolState::from_json(&fs::read_to_string(p).map_err(io_error(p))?)?,
        None => SyntheticPoolState::default(),
    };
    let (plan, next) = build_epoch_plan(&manifest, &cfg.sampler_config(), &cfg.curriculum, epoch, &state)?;
    let plan_path = plan_file(out_dir, epoch);
    let next_path = state_file(out_dir, epoch);
    write_file(&plan_path, &plan.to_jsonl())?;
    write_file(&next_path, &(next.to_json() + "\n"))?;
    info!(
        "epoch {epoch}: {} batches, {} entries",
        plan.batches.len(),
        plan.entries().count()
    );
    Ok(PlanOutput {
        plan,
        state: next,
        plan_path,
        state_path: next_path,
    })
}
