//! Silhouette-based camera calibration.
//!
//! The camera that re-renders a mesh into alignment with its source image is
//! the one maximizing the IoU between the observed foreground mask and the
//! rendered silhouette. Rasterized IoU is piecewise constant, so the search
//! is derivative-free: an exhaustive orbit grid followed by a Nelder–Mead
//! refinement over `(azimuth, elevation, radius, target_x, target_y)`.

mod simplex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use simplex::{nelder_mead, SimplexOptions, SimplexResult};

use crate::assets::{RasterImage, TexturedMesh};
use crate::render::{render_silhouette, OrbitCamera, RenderError};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("mask dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("observed mask has no foreground pixels")]
    EmptyMask,
    #[error("invalid calibration config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Intersection over union of two binary masks (nonzero = foreground).
///
/// Two empty masks score 0: an empty render is never an alignment.
pub fn mask_iou(a: &RasterImage, b: &RasterImage) -> Result<f64, CalibrationError> {
    if a.dims() != b.dims() || a.channels() != b.channels() {
        return Err(CalibrationError::DimensionMismatch(a.dims(), b.dims()));
    }
    let (mut inter, mut union) = (0u64, 0u64);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let (x, y) = (x != 0, y != 0);
        inter += u64::from(x && y);
        union += u64::from(x || y);
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub azimuth_step_deg: f64,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub elevation_step_deg: f64,
    /// Grid radii as multiples of the mesh's largest bounding-box extent.
    pub radius_multiples: Vec<f64>,
    pub max_iterations: usize,
    /// Refinement stops when the IoU spread across the simplex is below this.
    pub tolerance: f64,
    pub tau_iou: f64,
    pub fov_deg: f64,
    /// Render resolution; observed masks must match it.
    pub width: u32,
    pub height: u32,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            azimuth_step_deg: 15.0,
            elevation_min_deg: -30.0,
            elevation_max_deg: 60.0,
            elevation_step_deg: 15.0,
            radius_multiples: vec![1.5, 2.0, 2.5],
            max_iterations: 200,
            tolerance: 1e-4,
            tau_iou: 0.7,
            fov_deg: OrbitCamera::DEFAULT_FOV_DEG,
            width: 256,
            height: 512,
        }
    }
}

/// Initial simplex offsets for (azimuth°, elevation°, radius, target x, target y).
pub const SIMPLEX_STEPS: [f64; 5] = [5.0, 5.0, 0.1, 0.05, 0.05];

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: &str| Err(CalibrationError::InvalidConfig(m.into()));
        if !(self.azimuth_step_deg > 0.0) || !(self.elevation_step_deg > 0.0) {
            return bad("grid steps must be positive");
        }
        if !(self.elevation_min_deg <= self.elevation_max_deg)
            || self.elevation_min_deg < -90.0
            || self.elevation_max_deg > 90.0
        {
            return bad("elevation range must lie within [-90, 90]");
        }
        if self.radius_multiples.is_empty() || self.radius_multiples.iter().any(|r| !(*r > 0.0)) {
            return bad("radius multiples must be positive");
        }
        if !(0.0..=1.0).contains(&self.tau_iou) {
            return bad("tau_iou must lie in [0, 1]");
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be non-negative");
        }
        if self.width == 0 || self.height == 0 {
            return bad("render resolution must be non-empty");
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad("fov must lie in (0, 180)");
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    /// Stage-1 candidates in lexicographic `(azimuth, elevation, radius)` order.
    pub fn grid(&self, extent: f64) -> Vec<OrbitCamera> {
        let azimuths: Vec<f64> = Self::axis(0.0, 360.0, self.azimuth_step_deg)
            .into_iter()
            .filter(|a| *a < 360.0)
            .collect();
        let elevations = Self::axis(self.elevation_min_deg, self.elevation_max_deg, self.elevation_step_deg);
        let mut radii: Vec<f64> = self.radius_multiples.iter().map(|m| m * extent).collect();
        radii.sort_by(f64::total_cmp);
        let mut out = Vec::with_capacity(azimuths.len() * elevations.len() * radii.len());
        for &a in &azimuths {
            for &e in &elevations {
                for &r in &radii {
                    out.push(self.camera(a, e, r, 0.0, 0.0));
                }
            }
        }
        out
    }

    fn camera(&self, azimuth: f64, elevation: f64, radius: f64, tx: f64, ty: f64) -> OrbitCamera {
        OrbitCamera {
            azimuth_deg: azimuth.rem_euclid(360.0),
            elevation_deg: elevation,
            radius,
            target: [tx, ty, 0.0],
            fov_deg: self.fov_deg,
            width: self.width,
            height: self.height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub pose: OrbitCamera,
    pub iou: f64,
    pub accepted: bool,
    /// IoU of the best grid point, where refinement started.
    pub grid_iou: f64,
    pub iterations: usize,
}

impl CalibrationResult {
    pub fn new(pose: OrbitCamera, iou: f64, tau_iou: f64) -> Self {
        Self {
            pose,
            iou,
            accepted: iou >= tau_iou,
            grid_iou: iou,
            iterations: 0,
        }
    }
}

/// Render-and-compare objective shared by both stages.
struct Objective<'a> {
    mesh: &'a TexturedMesh,
    observed: &'a RasterImage,
}

impl Objective<'_> {
    fn iou(&self, cam: &OrbitCamera) -> Result<f64, CalibrationError> {
        mask_iou(self.observed, &render_silhouette(self.mesh, cam)?)
    }
}

/// Recover the orbit camera aligning `mesh` with the `observed` mask.
pub fn calibrate(
    mesh: &TexturedMesh,
    observed: &RasterImage,
    cfg: &CalibrationConfig,
) -> Result<CalibrationResult, CalibrationError> {
    cfg.validate()?;
    if observed.dims() != (cfg.width, cfg.height) || observed.channels() != 1 {
        return Err(CalibrationError::DimensionMismatch(observed.dims(), (cfg.width, cfg.height)));
    }
    if observed.data().iter().all(|&v| v == 0) {
        return Err(CalibrationError::EmptyMask);
    }
    let objective = Objective { mesh, observed };

    // Stage 1: exhaustive grid; first strict maximum in grid order wins.
    let grid = cfg.grid(mesh.max_extent());
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|cam| objective.iou(cam))
        .collect::<Result<_, _>>()?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    let start = grid[best];
    let grid_iou = scores[best];

    // Stage 2: simplex refinement on (azimuth, elevation, radius, tx, ty).
    let min_radius = 1e-3 * mesh.max_extent();
    let to_camera = |x: &[f64]| {
        cfg.camera(x[0], x[1].clamp(-90.0, 90.0), x[2].max(min_radius), x[3], x[4])
    };
    let x0 = [start.azimuth_deg, start.elevation_deg, start.radius, 0.0, 0.0];
    let mut failure = None;
    let refined = nelder_mead(
        &x0,
        &SIMPLEX_STEPS,
        SimplexOptions {
            max_iterations: cfg.max_iterations,
            f_tolerance: cfg.tolerance,
        },
        |x| match objective.iou(&to_camera(x)) {
            Ok(iou) => -iou,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }

    let pose = to_camera(&refined.x);
    let iou = objective.iou(&pose)?;
    Ok(CalibrationResult {
        pose,
        iou,
        accepted: iou >= cfg.tau_iou,
        grid_iou,
        iterations: refined.iterations,
    })
}
