//! Software rendering of textured meshes from an orbit camera.

mod camera;
mod raster;

use thiserror::Error;

pub use camera::{pose_from_orbit, CameraPose, OrbitCamera};
pub use raster::{render, render_silhouette, silhouette, RenderedView};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}
