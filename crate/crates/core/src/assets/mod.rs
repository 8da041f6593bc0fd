//! File-based inputs: meshes, images, masks and dataset manifests.

mod image;
mod manifest;
mod mask;
mod mesh;
mod obj;
pub mod procedural;

use std::path::PathBuf;

use thiserror::Error;

pub use self::image::{load_png, save_png, RasterImage};
pub use manifest::{DatasetManifest, Domain, SampleRecord};
pub use mask::{binarize, load_mask};
pub use mesh::{normalize_mesh, TexturedMesh, UpAxis};
pub use obj::{load_mesh, save_mesh};

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("{path}:{line}: non-triangular face with {corners} corners")]
    NonTriangularFace {
        path: PathBuf,
        line: usize,
        corners: usize,
    },

    #[error("{path}:{line}: {kind} index {index} out of range (count {count})")]
    IndexOutOfRange {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        index: i64,
        count: usize,
    },

    #[error("{path}: missing texture ({detail})")]
    MissingTexture { path: PathBuf, detail: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate geometry: mesh has zero extent along every axis")]
    DegenerateGeometry,

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("zero-area image")]
    ZeroArea,

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}
