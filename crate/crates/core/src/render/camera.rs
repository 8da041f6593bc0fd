use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::RenderError;

/// Elevation magnitude from which the pole up-vector rule applies.
const POLE_ELEVATION_DEG: f64 = 89.0;

/// Camera orbiting a target point.
///
/// Elevation is measured up from the horizontal plane; +90° looks straight
/// down (nadir). The world is Z-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitCamera {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub radius: f64,
    pub target: [f64; 3],
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl OrbitCamera {
    pub const DEFAULT_FOV_DEG: f64 = 40.0;

    /// Orbit around the origin with the default field of view.
    pub fn new(azimuth_deg: f64, elevation_deg: f64, radius: f64, width: u32, height: u32) -> Self {
        Self {
            azimuth_deg,
            elevation_deg,
            radius,
            target: [0.0; 3],
            fov_deg: Self::DEFAULT_FOV_DEG,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |msg: String| Err(RenderError::InvalidCamera(msg));
        if !self.azimuth_deg.is_finite() {
            return bad(format!("azimuth {} is not finite", self.azimuth_deg));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius {} must be positive", self.radius));
        }
        if !(-90.0..=90.0).contains(&self.elevation_deg) {
            return bad(format!("elevation {} outside [-90, 90]", self.elevation_deg));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad(format!("fov {} outside (0, 180)", self.fov_deg));
        }
        if self.target.iter().any(|c| !c.is_finite()) {
            return bad("target is not finite".into());
        }
        if self.width == 0 || self.height == 0 {
            return bad(format!("image size {}x{} is empty", self.width, self.height));
        }
        Ok(())
    }

    /// Azimuth reduced to `[0, 360)`.
    pub fn azimuth_normalized(&self) -> f64 {
        self.azimuth_deg.rem_euclid(360.0)
    }
}

/// Extrinsics `[R | t]` plus pinhole intrinsics.
///
/// Rows of `rotation` are the camera right, down and forward axes in world
/// coordinates, so camera space is x-right, y-down, z-forward.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub eye: Vector3<f64>,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub near: f64,
    pub far: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraPose {
    pub fn right(&self) -> Vector3<f64> {
        self.rotation.row(0).transpose()
    }

    pub fn up(&self) -> Vector3<f64> {
        -self.rotation.row(1).transpose()
    }

    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Pixel coordinates and depth of a world point, or `None` if it lies
    /// in front of the near plane.
    pub fn project(&self, p: [f64; 3]) -> Option<[f64; 3]> {
        let c = self.to_camera(&Vector3::from(p));
        if c.z <= self.near {
            return None;
        }
        Some([self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy, c.z])
    }
}

/// Build the pose of an orbit camera.
pub fn pose_from_orbit(cam: &OrbitCamera) -> Result<CameraPose, RenderError> {
    cam.validate()?;
    let phi = cam.azimuth_normalized().to_radians();
    let theta = cam.elevation_deg.to_radians();
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let target = Vector3::from(cam.target);
    let eye = target + cam.radius * Vector3::new(ct * cp, ct * sp, st);
    let forward = (target - eye).normalize();
    let world_up = if cam.elevation_deg.abs() >= POLE_ELEVATION_DEG {
        Vector3::new(-cp, -sp, 0.0)
    } else {
        Vector3::z()
    };
    let right = forward.cross(&world_up).normalize();
    let up = right.cross(&forward);
    let rotation = Matrix3::from_rows(&[
        right.transpose(),
        (-up).transpose(),
        forward.transpose(),
    ]);
    let translation = -(rotation * eye);
    let fy = 0.5 * f64::from(cam.height) / (0.5 * cam.fov_deg.to_radians()).tan();
    Ok(CameraPose {
        rotation,
        translation,
        eye,
        fx: fy,
        fy,
        cx: 0.5 * f64::from(cam.width),
        cy: 0.5 * f64::from(cam.height),
        near: 0.01 * cam.radius,
        far: 100.0 * cam.radius,
        width: cam.width,
        height: cam.height,
    })
}
