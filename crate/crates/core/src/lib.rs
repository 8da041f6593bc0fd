//! Calibrated novel-view synthesis for cross-viewpoint re-identification.
//!
//! The crate turns single-view textured meshes into geometrically consistent
//! training views and provides the training-data plane around them:
//!
//! * [`assets`]: OBJ meshes, PNG images and masks, JSONL dataset manifests.
//! * [`render`]: a deterministic z-buffered software rasterizer driven by an
//!   orbit camera, and the silhouette operator.
//! * [`calibration`]: silhouette IoU and the grid + simplex pose search that
//!   re-aligns a mesh with its source mask.
//! * [`synthesis`]: pose perturbation, compositing onto background plates and
//!   statistical color alignment.
//! * [`batch`]: elevation curriculum and the balanced real/synthetic P×K
//!   epoch planner.
//! * [`losses`]: forward reference values for identity, triplet and domain
//!   losses.
//! * [`metrics`]: CMC / mAP retrieval evaluation.
//! * [`pipeline`]: the file-driven stages used by the command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assets;
pub mod batch;
pub mod calibration;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod synthesis;

pub use assets::{DatasetManifest, Domain, RasterImage, SampleRecord, TexturedMesh};
pub use matrix::Matrix;
pub use render::{OrbitCamera, RenderedView};

/// Crate version, shared with the command-line tool.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
