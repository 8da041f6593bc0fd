use serde::{Deserialize, Serialize};

use super::{AssetError, RasterImage};

/// Triangle mesh with one per-face-corner UV set and a single RGB texture.
#[derive(Debug, Clone, PartialEq)]
pub struct TexturedMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[u32; 3]>,
    face_uvs: Vec<[[f64; 2]; 3]>,
    texture: RasterImage,
}

impl TexturedMesh {
    pub fn new(
        vertices: Vec<[f64; 3]>,
        faces: Vec<[u32; 3]>,
        face_uvs: Vec<[[f64; 2]; 3]>,
        texture: RasterImage,
    ) -> Result<Self, AssetError> {
        if vertices.len() < 3 {
            return Err(AssetError::InvalidMesh(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if faces.is_empty() {
            return Err(AssetError::InvalidMesh("mesh has no faces".into()));
        }
        if let Some(i) = vertices.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(AssetError::InvalidMesh(format!("vertex {i} is not finite")));
        }
        for (fi, face) in faces.iter().enumerate() {
            if let Some(&bad) = face.iter().find(|&&i| i as usize >= vertices.len()) {
                return Err(AssetError::InvalidMesh(format!(
                    "face {fi} references vertex {bad} of {}",
                    vertices.len()
                )));
            }
        }
        if face_uvs.len() != faces.len() {
            return Err(AssetError::InvalidMesh(format!(
                "{} faces but {} UV triplets",
                faces.len(),
                face_uvs.len()
            )));
        }
        for (fi, uvs) in face_uvs.iter().enumerate() {
            if uvs.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(AssetError::InvalidMesh(format!("face {fi} has UV outside [0,1]")));
            }
        }
        if texture.pixel_count() == 0 {
            return Err(AssetError::InvalidMesh("empty texture".into()));
        }
        let texture = if texture.channels() == 3 {
            texture
        } else {
            texture.to_rgb()
        };
        Ok(Self {
            vertices,
            faces,
            face_uvs,
            texture,
        })
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face_uvs(&self) -> &[[[f64; 2]; 3]] {
        &self.face_uvs
    }

    pub fn texture(&self) -> &RasterImage {
        &self.texture
    }

    /// Same geometry and UVs, different texture.
    pub fn with_texture(&self, texture: RasterImage) -> Result<Self, AssetError> {
        Self::new(
            self.vertices.clone(),
            self.faces.clone(),
            self.face_uvs.clone(),
            texture,
        )
    }

    /// Axis-aligned bounds as (min, max).
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Largest side of the axis-aligned bounding box.
    pub fn max_extent(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max)
    }

    /// Rotate the mesh so that `up` becomes +Z.
    pub fn to_z_up(&self, up: UpAxis) -> Self {
        let vertices = match up {
            UpAxis::Z => self.vertices.clone(),
            UpAxis::Y => self.vertices.iter().map(|&[x, y, z]| [x, -z, y]).collect(),
        };
        Self {
            vertices,
            ..self.clone()
        }
    }
}

/// Up axis of an incoming mesh. The renderer assumes Z-up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpAxis {
    #[default]
    Z,
    Y,
}

/// Center the bounding box at the origin and scale its largest extent to 1.
pub fn normalize_mesh(mesh: &TexturedMesh) -> Result<TexturedMesh, AssetError> {
    let (lo, hi) = mesh.bounds();
    let extent = mesh.max_extent();
    if !(extent > 0.0) {
        return Err(AssetError::DegenerateGeometry);
    }
    let center = [
        0.5 * (lo[0] + hi[0]),
        0.5 * (lo[1] + hi[1]),
        0.5 * (lo[2] + hi[2]),
    ];
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| {
            [
                (v[0] - center[0]) / extent,
                (v[1] - center[1]) / extent,
                (v[2] - center[2]) / extent,
            ]
        })
        .collect();
    Ok(TexturedMesh {
        vertices,
        ..mesh.clone()
    })
}
