//! Novel views from a calibrated pose: perturb, render, composite, align.

mod color;
mod composite;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use color::{
    channel_stats, color_align, opponent_to_rgb, rgb_to_opponent, transfer_statistics,
    OpponentImage, StatisticalColorTransfer, StyleAligner,
};
pub use composite::{blend, composite, feather_edges, SoftMask};

use crate::assets::{RasterImage, TexturedMesh};
use crate::render::{render, silhouette, OrbitCamera, RenderError};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("rendered view is empty")]
    EmptyView,
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("expected a {expected}-channel image, got {actual}")]
    Channels { expected: u8, actual: u8 },
    #[error("empty image")]
    EmptyImage,
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Which viewpoint gap is being synthesized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Ground imagery in, aerial views out: elevation moves toward nadir.
    #[serde(rename = "g2a")]
    GroundToAerial,
    /// Aerial imagery in, ground views out: elevation moves toward the horizon.
    #[serde(rename = "a2g")]
    AerialToGround,
}

impl Direction {
    /// View label written on synthesized manifest rows.
    pub fn target_view(self) -> &'static str {
        match self {
            Direction::GroundToAerial => "aerial",
            Direction::AerialToGround => "ground",
        }
    }

    fn sign_ok(self, delta_theta: f64) -> bool {
        match self {
            Direction::GroundToAerial => delta_theta >= 0.0,
            Direction::AerialToGround => delta_theta <= 0.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::GroundToAerial => "g2a",
            Direction::AerialToGround => "a2g",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "g2a" => Ok(Direction::GroundToAerial),
            "a2g" => Ok(Direction::AerialToGround),
            other => Err(format!("unknown direction {other:?} (expected g2a or a2g)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub delta_theta_max: f64,
    pub delta_phi_max: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            delta_theta_max: 30.0,
            delta_phi_max: 30.0,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if !(self.delta_theta_max > 0.0) || !(self.delta_phi_max > 0.0) {
            return Err(SynthesisError::InvalidPerturbation(
                "perturbation bounds must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Check that a perturbation lies in range and has the direction's sign.
    pub fn check(&self, dir: Direction, delta_theta: f64, delta_phi: f64) -> Result<(), SynthesisError> {
        if delta_theta.abs() > self.delta_theta_max || delta_phi.abs() > self.delta_phi_max {
            return Err(SynthesisError::InvalidPerturbation(format!(
                "({delta_theta}, {delta_phi}) exceeds ({}, {})",
                self.delta_theta_max, self.delta_phi_max
            )));
        }
        if !dir.sign_ok(delta_theta) {
            return Err(SynthesisError::InvalidPerturbation(format!(
                "delta_theta {delta_theta} has the wrong sign for {dir}"
            )));
        }
        Ok(())
    }
}

/// Draw `(delta_theta, delta_phi)` in degrees.
///
/// `delta_theta` is uniform on `[0, max]` toward nadir or `[-max, 0]` toward
/// the horizon; `delta_phi` is uniform on `[-max, max]`.
pub fn sample_perturbation<R: Rng + ?Sized>(
    rng: &mut R,
    dir: Direction,
    cfg: &PerturbationConfig,
) -> (f64, f64) {
    let magnitude = rng.gen_range(0.0..=cfg.delta_theta_max);
    let delta_theta = match dir {
        Direction::GroundToAerial => magnitude,
        Direction::AerialToGround => -magnitude,
    };
    let delta_phi = rng.gen_range(-cfg.delta_phi_max..=cfg.delta_phi_max);
    (delta_theta, delta_phi)
}

/// Shift elevation (clamped to ±90°) and azimuth (wrapped to [0, 360)).
pub fn perturb_pose(cam: &OrbitCamera, delta_theta: f64, delta_phi: f64) -> OrbitCamera {
    OrbitCamera {
        elevation_deg: (cam.elevation_deg + delta_theta).clamp(-90.0, 90.0),
        azimuth_deg: (cam.azimuth_deg + delta_phi).rem_euclid(360.0),
        ..*cam
    }
}

/// Provenance of a synthesized view.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViewSource {
    pub identity: String,
    pub record_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedView {
    /// Rendered RGB; black where nothing was drawn.
    pub image: RasterImage,
    pub fg_mask: RasterImage,
    pub delta_theta: f64,
    pub delta_phi: f64,
    pub source: ViewSource,
}

/// Render `mesh` at the calibrated pose shifted by the given perturbation.
pub fn synthesize_view(
    mesh: &TexturedMesh,
    calibrated: &OrbitCamera,
    delta_theta: f64,
    delta_phi: f64,
    source: ViewSource,
) -> Result<SynthesizedView, SynthesisError> {
    let cam = perturb_pose(calibrated, delta_theta, delta_phi);
    let view = render(mesh, &cam)?;
    let fg_mask = silhouette(&view);
    if fg_mask.data().iter().all(|&v| v == 0) {
        return Err(SynthesisError::EmptyView);
    }
    Ok(SynthesizedView {
        image: view.color().to_rgb(),
        fg_mask,
        delta_theta,
        delta_phi,
        source,
    })
}
