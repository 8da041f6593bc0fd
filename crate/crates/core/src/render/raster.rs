//! Z-buffered triangle rasterization with perspective-correct, bilinearly
//! filtered texture lookup. No lighting, no anti-aliasing, no culling.
//!
//! Pixels are sampled at their centers. Rows are processed in independent
//! bands; every band walks the triangles in mesh order, so the output does
//! not depend on how bands are scheduled.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::{pose_from_orbit, CameraPose, OrbitCamera, RenderError};
use crate::assets::{RasterImage, TexturedMesh};

const BAND_ROWS: usize = 16;
// barycentric slack so that shared edges never leave gaps
const EDGE_EPS: f64 = 1e-9;

/// Output of [`render`]: an RGBA image and a depth buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    color: RasterImage,
    depth: Vec<f64>,
}

impl RenderedView {
    pub fn color(&self) -> &RasterImage {
        &self.color
    }

    /// Per-pixel view depth; `f64::INFINITY` where nothing was drawn.
    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    pub fn width(&self) -> u32 {
        self.color.width()
    }

    pub fn height(&self) -> u32 {
        self.color.height()
    }

    /// Build a view from raw parts, checking that alpha and depth agree.
    pub fn from_parts(color: RasterImage, depth: Vec<f64>) -> Option<Self> {
        if color.channels() != 4 || depth.len() != color.pixel_count() {
            return None;
        }
        let consistent = color
            .data()
            .chunks_exact(4)
            .zip(&depth)
            .all(|(p, d)| (p[3] > 0) == d.is_finite());
        consistent.then_some(Self { color, depth })
    }
}

#[derive(Clone, Copy)]
struct ClipVertex {
    pos: Vector3<f64>,
    uv: [f64; 2],
}

/// A clipped, projected triangle ready for scan conversion.
struct ScreenTriangle {
    xy: [[f64; 2]; 3],
    inv_z: [f64; 3],
    uv_over_z: [[f64; 2]; 3],
    inv_area: f64,
    min_y: f64,
    max_y: f64,
    min_x: f64,
    max_x: f64,
}

fn clip_near(tri: [ClipVertex; 3], near: f64) -> Vec<ClipVertex> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let a_in = a.pos.z >= near;
        let b_in = b.pos.z >= near;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (near - a.pos.z) / (b.pos.z - a.pos.z);
            out.push(ClipVertex {
                pos: a.pos + (b.pos - a.pos) * t,
                uv: [
                    a.uv[0] + (b.uv[0] - a.uv[0]) * t,
                    a.uv[1] + (b.uv[1] - a.uv[1]) * t,
                ],
            });
        }
    }
    out
}

fn setup_triangles(mesh: &TexturedMesh, pose: &CameraPose) -> Vec<ScreenTriangle> {
    let cam_verts: Vec<Vector3<f64>> = mesh
        .vertices()
        .iter()
        .map(|v| pose.to_camera(&Vector3::from(*v)))
        .collect();
    let mut tris = Vec::with_capacity(mesh.faces().len());
    for (face, uvs) in mesh.faces().iter().zip(mesh.face_uvs()) {
        let corners = [0, 1, 2].map(|k| ClipVertex {
            pos: cam_verts[face[k] as usize],
            uv: uvs[k],
        });
        if corners.iter().all(|c| c.pos.z > pose.far) {
            continue;
        }
        let poly = clip_near(corners, pose.near);
        for k in 1..poly.len().saturating_sub(1) {
            let tri = [poly[0], poly[k], poly[k + 1]];
            let xy = tri.map(|c| {
                [
                    pose.fx * c.pos.x / c.pos.z + pose.cx,
                    pose.fy * c.pos.y / c.pos.z + pose.cy,
                ]
            });
            let area = edge(xy[0], xy[1], xy[2]);
            if !area.is_finite() || area.abs() < 1e-12 {
                continue;
            }
            let inv_z = tri.map(|c| 1.0 / c.pos.z);
            let uv_over_z = [0, 1, 2].map(|k| [tri[k].uv[0] * inv_z[k], tri[k].uv[1] * inv_z[k]]);
            let xs = xy.map(|p| p[0]);
            let ys = xy.map(|p| p[1]);
            tris.push(ScreenTriangle {
                xy,
                inv_z,
                uv_over_z,
                inv_area: 1.0 / area,
                min_x: xs.iter().copied().fold(f64::INFINITY, f64::min),
                max_x: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                min_y: ys.iter().copied().fold(f64::INFINITY, f64::min),
                max_y: ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    tris
}

#[inline]
fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Inclusive pixel index range whose centers may fall in `[lo, hi]`.
fn pixel_span(lo: f64, hi: f64, limit: usize) -> Option<(usize, usize)> {
    let first = (lo - 0.5).ceil() - 1.0;
    let last = (hi - 0.5).floor() + 1.0;
    if last < 0.0 || first > (limit as f64 - 1.0) {
        return None;
    }
    Some((first.max(0.0) as usize, (last as usize).min(limit - 1)))
}

fn sample_bilinear(tex: &RasterImage, u: f64, v: f64) -> [u8; 3] {
    let (w, h) = (tex.width() as i64, tex.height() as i64);
    let tx = u * w as f64 - 0.5;
    let ty = (1.0 - v) * h as f64 - 0.5;
    let x0 = tx.floor();
    let y0 = ty.floor();
    let fx = tx - x0;
    let fy = ty - y0;
    let clamp_x = |x: i64| x.clamp(0, w - 1) as u32;
    let clamp_y = |y: i64| y.clamp(0, h - 1) as u32;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let p00 = tex.pixel(clamp_x(x0), clamp_y(y0));
    let p10 = tex.pixel(clamp_x(x0 + 1), clamp_y(y0));
    let p01 = tex.pixel(clamp_x(x0), clamp_y(y0 + 1));
    let p11 = tex.pixel(clamp_x(x0 + 1), clamp_y(y0 + 1));
    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p10[c]) * fx;
        let bottom = f64::from(p01[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
        let v = top * (1.0 - fy) + bottom * fy;
        out[c] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
    }
    out
}

fn rasterize_band(
    tris: &[ScreenTriangle],
    tex: Option<&RasterImage>,
    far: f64,
    width: usize,
    row0: usize,
    color: &mut [u8],
    depth: &mut [f64],
) {
    let rows = depth.len() / width;
    for tri in tris {
        let Some((y_lo, y_hi)) = pixel_span(tri.min_y, tri.max_y, row0 + rows) else {
            continue;
        };
        if y_hi < row0 {
            continue;
        }
        let Some((x_lo, x_hi)) = pixel_span(tri.min_x, tri.max_x, width) else {
            continue;
        };
        for y in y_lo.max(row0)..=y_hi {
            let py = y as f64 + 0.5;
            for x in x_lo..=x_hi {
                let p = [x as f64 + 0.5, py];
                let b0 = edge(tri.xy[1], tri.xy[2], p) * tri.inv_area;
                let b1 = edge(tri.xy[2], tri.xy[0], p) * tri.inv_area;
                let b2 = edge(tri.xy[0], tri.xy[1], p) * tri.inv_area;
                if b0 < -EDGE_EPS || b1 < -EDGE_EPS || b2 < -EDGE_EPS {
                    continue;
                }
                let inv_z = b0 * tri.inv_z[0] + b1 * tri.inv_z[1] + b2 * tri.inv_z[2];
                if !(inv_z > 0.0) {
                    continue;
                }
                let z = 1.0 / inv_z;
                let i = (y - row0) * width + x;
                if z > far || z >= depth[i] {
                    continue;
                }
                depth[i] = z;
                let px = &mut color[4 * i..4 * i + 4];
                match tex {
                    Some(tex) => {
                        let u = (b0 * tri.uv_over_z[0][0]
                            + b1 * tri.uv_over_z[1][0]
                            + b2 * tri.uv_over_z[2][0])
                            * z;
                        let v = (b0 * tri.uv_over_z[0][1]
                            + b1 * tri.uv_over_z[1][1]
                            + b2 * tri.uv_over_z[2][1])
                            * z;
                        let rgb = sample_bilinear(tex, u, v);
                        px.copy_from_slice(&[rgb[0], rgb[1], rgb[2], 255]);
                    }
                    None => px.copy_from_slice(&[255, 255, 255, 255]),
                }
            }
        }
    }
}

fn rasterize(mesh: &TexturedMesh, cam: &OrbitCamera, shade: bool) -> Result<RenderedView, RenderError> {
    let pose = pose_from_orbit(cam)?;
    let tris = setup_triangles(mesh, &pose);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut color = vec![0u8; w * h * 4];
    let mut depth = vec![f64::INFINITY; w * h];
    let tex = shade.then(|| mesh.texture());
    color
        .par_chunks_mut(BAND_ROWS * w * 4)
        .zip(depth.par_chunks_mut(BAND_ROWS * w))
        .enumerate()
        .for_each(|(band, (c, d))| {
            rasterize_band(&tris, tex, pose.far, w, band * BAND_ROWS, c, d);
        });
    let color = RasterImage::new(cam.width, cam.height, 4, color).expect("sized buffer");
    Ok(RenderedView { color, depth })
}

/// Render the mesh from `cam` into a foreground-only RGBA view.
///
/// Uncovered pixels are `(0, 0, 0, 0)` with infinite depth. A mesh that is
/// entirely behind the camera yields a fully transparent view.
pub fn render(mesh: &TexturedMesh, cam: &OrbitCamera) -> Result<RenderedView, RenderError> {
    rasterize(mesh, cam, true)
}

/// Binary coverage mask of `view`: 255 where alpha > 0.
pub fn silhouette(view: &RenderedView) -> RasterImage {
    let data = view
        .color
        .data()
        .chunks_exact(4)
        .map(|p| if p[3] > 0 { 255 } else { 0 })
        .collect();
    RasterImage::new(view.width(), view.height(), 1, data).unwrap()
}

/// `silhouette(render(mesh, cam))` without texture sampling.
///
/// Coverage and depth testing are shared with [`render`], so the two masks
/// are identical.
pub fn render_silhouette(mesh: &TexturedMesh, cam: &OrbitCamera) -> Result<RasterImage, RenderError> {
    Ok(silhouette(&rasterize(mesh, cam, false)?))
}
