//! `synthesize`: render, composite and color-align novel views for every
//! accepted calibration row.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{
    io_error, load_normalized_mesh, parent_dir, resolve, write_file, CalibrationReport, PipelineConfig,
    PipelineError, CALIBRATION_FILE,
};
use crate::assets::{load_png, save_png, DatasetManifest, SampleRecord};
use crate::rng::stream;
use crate::synthesis::{
    composite, sample_perturbation, synthesize_view, StatisticalColorTransfer, StyleAligner, SynthesisError,
    ViewSource,
};

pub const SYNTHETIC_DIR: &str = "synthetic";
pub const SYNTHETIC_MANIFEST: &str = "synthetic.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisSummary {
    pub manifest: DatasetManifest,
    pub failed_rows: usize,
    pub empty_views: usize,
}

/// Recorded angles carry two decimals; the render uses the recorded values.
fn round2(x: f64) -> f64 {
    let r = (x * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// File stem unique per record id and stable under manifest reordering.
fn output_stem(record_id: &str) -> String {
    let stem: String = Path::new(record_id)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    let digest = Sha256::digest(record_id.as_bytes());
    let tag: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
    format!("{stem}_{tag}")
}

fn background_pool(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| PipelineError::Validation(format!("background directory {}: {e}", dir.display())))?;
    let mut pool = Vec::new();
    for entry in entries {
        let path = entry.map_err(io_error(dir))?.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            pool.push(path);
        }
    }
    pool.sort();
    if pool.is_empty() {
        return Err(PipelineError::Validation(format!(
            "background directory {} contains no PNG files",
            dir.display()
        )));
    }
    Ok(pool)
}

struct Job<'a> {
    cfg: &'a PipelineConfig,
    base: PathBuf,
    out_dir: &'a Path,
    backgrounds: &'a [PathBuf],
    references: &'a [&'a SampleRecord],
}

impl Job<'_> {
    /// All views for one source row, or the error that stopped it.
    fn row(&self, rec: &SampleRecord, pose: &crate::render::OrbitCamera) -> Result<(Vec<SampleRecord>, usize), String> {
        let syn = &self.cfg.synthesis;
        let (w, h) = (self.cfg.calibration.width, self.cfg.calibration.height);
        let mesh_path = rec.mesh.as_deref().ok_or("row has no mesh")?;
        let mesh =
            load_normalized_mesh(&resolve(&self.base, mesh_path), self.cfg.mesh.up_axis).map_err(|e| e.to_string())?;
        let pose = crate::render::OrbitCamera { width: w, height: h, ..*pose };
        let mut rng = stream(self.cfg.seed, &["synthesize".into(), rec.record_id().into()]);
        let stem = output_stem(rec.record_id());
        let mut out = Vec::with_capacity(syn.views);
        let mut empty = 0;
        for v in 0..syn.views {
            let (dt, dp) = sample_perturbation(&mut rng, syn.direction, &syn.perturbation());
            let (dt, dp) = (round2(dt), round2(dp));
            let background = self.backgrounds.choose(&mut rng).expect("non-empty pool");
            let reference = self.references.choose(&mut rng).expect("non-empty references");
            let source = ViewSource {
                identity: rec.identity.clone(),
                record_id: rec.record_id().to_owned(),
            };
            let view = match synthesize_view(&mesh, &pose, dt, dp, source) {
                Ok(view) => view,
                Err(SynthesisError::EmptyView) => {
                    warn!("{}: view {v} at ({dt}, {dp}) is empty; skipped", rec.record_id());
                    empty += 1;
                    continue;
                }
                Err(e) => return Err(e.to_string()),
            };
            let bg = load_png(background, false).map_err(|e| e.to_string())?.to_rgb().resize(w, h);
            let style = load_png(resolve(&self.base, &reference.image), false)
                .map_err(|e| e.to_string())?
                .to_rgb();
            let blended = composite(&view, &bg, syn.feather_radius).map_err(|e| e.to_string())?;
            let styled = StatisticalColorTransfer.align(&blended, &style).map_err(|e| e.to_string())?;

            let image = format!("{SYNTHETIC_DIR}/{stem}_v{v}.png");
            let mask = format!("{SYNTHETIC_DIR}/{stem}_v{v}_mask.png");
            save_png(&styled, self.out_dir.join(&image)).map_err(|e| e.to_string())?;
            save_png(&view.fg_mask, self.out_dir.join(&mask)).map_err(|e| e.to_string())?;
            let mut row = SampleRecord::synthetic(rec.identity.clone(), image, dt, dp);
            row.mask = Some(mask);
            row.view = syn.direction.target_view().to_owned();
            out.push(row);
        }
        Ok((out, empty))
    }
}

/// Synthesize views for every accepted row and write `synthetic.jsonl`.
pub fn run_synthesize(cfg: &PipelineConfig) -> Result<SynthesisSummary, PipelineError> {
    cfg.validate()?;
    let manifest_path = cfg.source_manifest_path()?;
    let manifest = cfg.load_manifest(manifest_path)?;
    let out_dir = cfg.output_dir()?;
    let report_path = out_dir.join(CALIBRATION_FILE);
    if !report_path.exists() {
        return Err(PipelineError::Validation(format!(
            "calibration report {} is missing; run calibrate first",
            report_path.display()
        )));
    }
    let report = CalibrationReport::load(&report_path)?;
    let background_dir = cfg
        .paths
        .background_dir
        .as_deref()
        .ok_or_else(|| PipelineError::Config("paths.background_dir is not set".into()))?;
    let backgrounds = background_pool(background_dir)?;
    let mut references: Vec<&SampleRecord> = manifest.real().collect();
    references.sort_by(|a, b| a.record_id().cmp(b.record_id()));
    if references.is_empty() {
        return Err(PipelineError::Validation("manifest has no real rows to use as style references".into()));
    }
    let syn_dir = out_dir.join(SYNTHETIC_DIR);
    fs::create_dir_all(&syn_dir).map_err(io_error(&syn_dir))?;

    let job = Job {
        cfg,
        base: parent_dir(manifest_path),
        out_dir,
        backgrounds: &backgrounds,
        references: &references,
    };
    let accepted: Vec<_> = report.accepted().collect();
    let results: Vec<Result<(Vec<SampleRecord>, usize), String>> = accepted
        .par_iter()
        .map(|row| {
            let rec = manifest
                .find(&row.record)
                .ok_or_else(|| format!("record {} is not in the manifest", row.record))?;
            let pose = row.pose.as_ref().ok_or("accepted row has no pose")?;
            job.row(rec, pose)
        })
        .collect();

    let mut rows = Vec::new();
    let (mut failed, mut empty_views) = (0, 0);
    for (row, result) in accepted.iter().zip(results) {
        match result {
            Ok((views, empty)) => {
                rows.extend(views);
                empty_views += empty;
            }
            Err(e) => {
                warn!("synthesis failed for {}: {e}", row.record);
                failed += 1;
            }
        }
    }
    let synthetic = DatasetManifest::new(rows, cfg.curriculum.delta_theta_max)?;
    write_file(&out_dir.join(SYNTHETIC_MANIFEST), &synthetic.to_jsonl())?;
    info!(
        "synthesized {} views from {} accepted rows ({} failed, {} empty views)",
        synthetic.len(),
        accepted.len(),
        failed,
        empty_views
    );
    if !accepted.is_empty() && failed == accepted.len() {
        return Err(PipelineError::Runtime(format!("all {failed} accepted rows failed to synthesize")));
    }
    Ok(SynthesisSummary {
        manifest: synthetic,
        failed_rows: failed,
        empty_views,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_two_decimals_and_sign() {
        assert_eq!(round2(12.3456), 12.35);
        assert_eq!(round2(-0.001), 0.0);
        assert!(round2(-0.001).is_sign_positive());
        assert_eq!(round2(29.999), 30.0);
    }

    #[test]
    fn stems_are_distinct_for_colliding_names() {
        let a = output_stem("a/b.png");
        let b = output_stem("a_b.png");
        assert_ne!(a, b);
        assert!(a.starts_with("b_"));
        assert_eq!(output_stem("x/y z.png"), output_stem("x/y z.png"));
    }
}
