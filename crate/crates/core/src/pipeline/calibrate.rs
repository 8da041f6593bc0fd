//! `calibrate`: recover an orbit camera for every real row with a mesh.

use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{io_error, load_normalized_mesh, parent_dir, resolve, write_file, PipelineConfig, PipelineError};
use crate::assets::{load_mask, SampleRecord};
use crate::calibration::{calibrate, CalibrationConfig};
use crate::render::OrbitCamera;

pub const CALIBRATION_FILE: &str = "calibration.jsonl";

/// One report line: a pose and its IoU, or the error that stopped the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationRow {
    pub record: String,
    pub identity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<OrbitCamera>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationReport {
    pub rows: Vec<CalibrationRow>,
}

impl CalibrationReport {
    pub fn accepted(&self) -> impl Iterator<Item = &CalibrationRow> {
        self.rows.iter().filter(|r| r.accepted)
    }

    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.accepted().count() as f64 / self.rows.len() as f64
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r).expect("report serializes"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        let rows = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| PipelineError::Validation(format!("{}:{}: {e}", path.display(), i + 1)))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { rows })
    }

    pub fn summary(&self) -> String {
        format!(
            "calibrated {} rows: {} accepted, {} rejected, {} failed (acceptance rate {:.3})",
            self.rows.len(),
            self.accepted().count(),
            self.rows.len() - self.accepted().count() - self.failed(),
            self.failed(),
            self.acceptance_rate()
        )
    }
}

fn calibrate_row(
    rec: &SampleRecord,
    base: &Path,
    cfg: &CalibrationConfig,
    pipeline: &PipelineConfig,
) -> Result<(OrbitCamera, f64, bool), String> {
    let mesh_path = rec.mesh.as_deref().ok_or("row has no mesh")?;
    let mask_path = rec.mask.as_deref().ok_or("row has no mask")?;
    let mesh = load_normalized_mesh(&resolve(base, mesh_path), pipeline.mesh.up_axis).map_err(|e| e.to_string())?;
    let mask = load_mask(resolve(base, mask_path))
        .map_err(|e| e.to_string())?
        .resize_nearest(cfg.width, cfg.height);
    let result = calibrate(&mesh, &mask, cfg).map_err(|e| e.to_string())?;
    Ok((result.pose, result.iou, result.accepted))
}

/// Calibrate every real row and write `calibration.jsonl` in manifest order.
///
/// Row-level problems become error lines; the stage fails only when every
/// row fails.
pub fn run_calibrate(cfg: &PipelineConfig) -> Result<CalibrationReport, PipelineError> {
    cfg.validate()?;
    let manifest_path = cfg.source_manifest_path()?;
    let manifest = cfg.load_manifest(manifest_path)?;
    let out_dir = cfg.output_dir()?;
    let base = parent_dir(manifest_path);
    let rows: Vec<&SampleRecord> = manifest.real().collect();
    if rows.is_empty() {
        return Err(PipelineError::Validation(format!(
            "manifest {} has no real rows to calibrate",
            manifest_path.display()
        )));
    }
    let report = CalibrationReport {
        rows: rows
            .par_iter()
            .map(|rec| {
                let mut row = CalibrationRow {
                    record: rec.record_id().to_owned(),
                    identity: rec.identity.clone(),
                    pose: None,
                    iou: None,
                    accepted: false,
                    error: None,
                };
                match calibrate_row(rec, &base, &cfg.calibration, cfg) {
                    Ok((pose, iou, accepted)) => {
                        row.pose = Some(pose);
                        row.iou = Some(iou);
                        row.accepted = accepted;
                    }
                    Err(e) => {
                        warn!("calibration failed for {}: {e}", rec.record_id());
                        row.error = Some(e);
                    }
                }
                row
            })
            .collect(),
    };
    write_file(&out_dir.join(CALIBRATION_FILE), &report.to_jsonl())?;
    info!("{}", report.summary());
    if report.failed() == report.rows.len() {
        return Err(PipelineError::Runtime(format!(
            "all {} rows failed to calibrate",
            report.rows.len()
        )));
    }
    Ok(report)
}
