//! Procedural textured meshes used as fixtures and for self-calibration runs.

use rand::Rng;

use super::{RasterImage, TexturedMesh};
use crate::rng;

/// Incrementally assembles boxes and quads into one textured mesh.
#[derive(Debug, Default)]
pub struct MeshBuilder {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[u32; 3]>,
    face_uvs: Vec<[[f64; 2]; 3]>,
}

/// A sub-rectangle of texture space, `[u0, v0, u1, v1]`.
pub type UvRect = [f64; 4];

pub const FULL_UV: UvRect = [0.0, 0.0, 1.0, 1.0];

impl MeshBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a planar quad given its corners in counter-clockwise order.
    pub fn quad(&mut self, corners: [[f64; 3]; 4], uv: UvRect) -> &mut Self {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&corners);
        let [u0, v0, u1, v1] = uv;
        let c = [[u0, v0], [u1, v0], [u1, v1], [u0, v1]];
        self.faces.push([base, base + 1, base + 2]);
        self.face_uvs.push([c[0], c[1], c[2]]);
        self.faces.push([base, base + 2, base + 3]);
        self.face_uvs.push([c[0], c[2], c[3]]);
        self
    }

    /// Add an axis-aligned box with 8 shared vertices and 12 triangles.
    pub fn cuboid(&mut self, min: [f64; 3], max: [f64; 3], uv: UvRect) -> &mut Self {
        let base = self.vertices.len() as u32;
        for k in 0..8u32 {
            self.vertices.push([
                if k & 1 == 0 { min[0] } else { max[0] },
                if k & 2 == 0 { min[1] } else { max[1] },
                if k & 4 == 0 { min[2] } else { max[2] },
            ]);
        }
        let [u0, v0, u1, v1] = uv;
        let c = [[u0, v0], [u1, v0], [u1, v1], [u0, v1]];
        // each face as a CCW (seen from outside) loop of corner indices
        const SIDES: [[u32; 4]; 6] = [
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
        ];
        for s in SIDES {
            self.faces.push([base + s[0], base + s[1], base + s[2]]);
            self.face_uvs.push([c[0], c[1], c[2]]);
            self.faces.push([base + s[0], base + s[2], base + s[3]]);
            self.face_uvs.push([c[0], c[2], c[3]]);
        }
        self
    }

    pub fn build(&self, texture: RasterImage) -> TexturedMesh {
        TexturedMesh::new(
            self.vertices.clone(),
            self.faces.clone(),
            self.face_uvs.clone(),
            texture,
        )
        .expect("builder output satisfies mesh invariants")
    }
}

/// Two-color RGB checkerboard with square cells of `cell` pixels.
pub fn checkerboard(width: u32, height: u32, cell: u32) -> RasterImage {
    let mut data = Vec::with_capacity((width * height * 3) as usize);
    for y in 0..height {
        for x in 0..width {
            let on = ((x / cell) + (y / cell)).is_multiple_of(2);
            data.extend_from_slice(if on { &[230, 230, 230] } else { &[30, 60, 120] });
        }
    }
    RasterImage::new(width, height, 3, data).unwrap()
}

/// Cube spanning `[0,1]³`: 8 vertices, 12 triangles, checkerboard texture.
pub fn unit_cube() -> TexturedMesh {
    MeshBuilder::new()
        .cuboid([0.0; 3], [1.0; 3], FULL_UV)
        .build(checkerboard(16, 16, 4))
}

/// Unit quad `[-0.5,0.5]²` in the plane `x = 0`, facing +x.
pub fn unit_quad(texture: RasterImage) -> TexturedMesh {
    MeshBuilder::new()
        .quad(
            [
                [0.0, -0.5, -0.5],
                [0.0, 0.5, -0.5],
                [0.0, 0.5, 0.5],
                [0.0, -0.5, 0.5],
            ],
            FULL_UV,
        )
        .build(texture)
}

/// Box centered at the origin with the given side lengths.
pub fn tall_box(size: [f64; 3]) -> TexturedMesh {
    let h = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
    MeshBuilder::new()
        .cuboid([-h[0], -h[1], -h[2]], h, FULL_UV)
        .build(checkerboard(16, 16, 4))
}

/// Color used for the marker patch of [`marker_box`].
pub const MARKER_COLOR: [u8; 3] = [255, 0, 0];

/// Gray box with a small red marker patch floating just off the center of
/// its +x face. Returns the mesh and the marker center in model units.
pub fn marker_box() -> (TexturedMesh, [f64; 3]) {
    // left half of the texture is gray, right half is marker red
    let mut data = Vec::new();
    for _y in 0..4 {
        for x in 0..8 {
            data.extend_from_slice(if x < 4 { &[128, 128, 128] } else { &MARKER_COLOR });
        }
    }
    let tex = RasterImage::new(8, 4, 3, data).unwrap();
    let gray: UvRect = [0.0, 0.0, 0.4, 1.0];
    let red: UvRect = [0.6, 0.0, 1.0, 1.0];
    let x = 0.2 + 1e-3;
    let m = 0.02;
    let mesh = MeshBuilder::new()
        .cuboid([-0.2, -0.3, -0.5], [0.2, 0.3, 0.5], gray)
        .quad(
            [[x, -m, -m], [x, m, -m], [x, m, m], [x, -m, m]],
            red,
        )
        .build(tex);
    (mesh, [x, 0.0, 0.0])
}

/// Asymmetric union of 3 to 5 random boxes with a random patchwork texture.
pub fn random_blocks(seed: u64) -> TexturedMesh {
    let mut rng = rng::stream(seed, &["procedural-blocks".into()]);
    let cells = 4u32;
    let cell_px = 8u32;
    let side = cells * cell_px;
    let palette: Vec<[u8; 3]> = (0..cells * cells)
        .map(|_| [rng.gen_range(20..236), rng.gen_range(20..236), rng.gen_range(20..236)])
        .collect();
    let mut data = Vec::with_capacity((side * side * 3) as usize);
    for y in 0..side {
        for x in 0..side {
            let c = palette[((y / cell_px) * cells + x / cell_px) as usize];
            // a little in-cell gradient so textures are not flat
            let g = ((x % cell_px) * 3) as u8;
            data.extend_from_slice(&[c[0].saturating_add(g), c[1], c[2].saturating_sub(g)]);
        }
    }
    let texture = RasterImage::new(side, side, 3, data).unwrap();
    let cell_uv = |i: u32| -> UvRect {
        let (cx, cy) = ((i % cells) as f64, (i / cells) as f64);
        let s = 1.0 / cells as f64;
        [cx * s, cy * s, (cx + 1.0) * s, (cy + 1.0) * s]
    };

    let mut b = MeshBuilder::new();
    let torso = [
        rng.gen_range(0.25..0.45),
        rng.gen_range(0.15..0.3),
        rng.gen_range(0.6..1.0),
    ];
    b.cuboid(
        [-torso[0] / 2.0, -torso[1] / 2.0, -torso[2] / 2.0],
        [torso[0] / 2.0, torso[1] / 2.0, torso[2] / 2.0],
        cell_uv(0),
    );
    let extra = rng.gen_range(2..=4);
    for i in 0..extra {
        let size = [
            rng.gen_range(0.08..0.35),
            rng.gen_range(0.08..0.3),
            rng.gen_range(0.08..0.4),
        ];
        // attach on a random side of the torso, biased so the result is not mirror-symmetric
        let side = rng.gen_range(0..4);
        let along_z = rng.gen_range(-torso[2] / 2.0..torso[2] / 2.0);
        let center = match side {
            0 => [torso[0] / 2.0 + size[0] / 2.0 - 0.02, rng.gen_range(-0.1..0.1), along_z],
            1 => [-torso[0] / 2.0 - size[0] / 2.0 + 0.02, rng.gen_range(-0.1..0.1), along_z],
            2 => [rng.gen_range(-0.1..0.1), torso[1] / 2.0 + size[1] / 2.0 - 0.02, along_z],
            _ => [rng.gen_range(-0.15..0.15), rng.gen_range(-0.1..0.1), torso[2] / 2.0 + size[2] / 2.0 - 0.02],
        };
        b.cuboid(
            [center[0] - size[0] / 2.0, center[1] - size[1] / 2.0, center[2] - size[2] / 2.0],
            [center[0] + size[0] / 2.0, center[1] + size[1] / 2.0, center[2] + size[2] / 2.0],
            cell_uv(1 + i),
        );
    }
    b.build(texture)
}
