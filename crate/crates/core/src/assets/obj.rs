//! Wavefront OBJ subset: `v`, `vt`, triangular `f` with texture indices, and
//! a single material whose `map_Kd` names the diffuse texture.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{load_png, save_png, AssetError, TexturedMesh};

// UVs this far outside [0,1] are treated as exporter rounding and clamped.
const UV_SLACK: f64 = 1e-6;

struct FaceRef {
    line: usize,
    corners: [(i64, i64); 3],
}

fn read_text(path: &Path) -> Result<String, AssetError> {
    if !path.exists() {
        return Err(AssetError::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|source| AssetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_floats<const N: usize>(
    path: &Path,
    line: usize,
    tokens: &[&str],
    what: &str,
) -> Result<[f64; N], AssetError> {
    if tokens.len() < N {
        return Err(AssetError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{what} needs {N} components"),
        });
    }
    let mut out = [0.0f64; N];
    for (slot, tok) in out.iter_mut().zip(tokens) {
        *slot = tok.parse().map_err(|_| AssetError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("bad number {tok:?} in {what}"),
        })?;
        if !slot.is_finite() {
            return Err(AssetError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("non-finite {what} component"),
            });
        }
    }
    Ok(out)
}

/// Resolve a 1-based (or negative, relative) OBJ index into a 0-based one.
fn resolve_index(raw: i64, count: usize) -> i64 {
    if raw < 0 {
        count as i64 + raw
    } else {
        raw - 1
    }
}

fn parse_corner(
    path: &Path,
    line: usize,
    token: &str,
    n_vertices: usize,
    n_uvs: usize,
) -> Result<(i64, i64), AssetError> {
    let mut parts = token.split('/');
    let parse = |s: Option<&str>, what: &str| -> Result<i64, AssetError> {
        let s = s.filter(|s| !s.is_empty()).ok_or_else(|| AssetError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("face corner {token:?} lacks a {what} index"),
        })?;
        let v: i64 = s.parse().map_err(|_| AssetError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("bad {what} index {s:?}"),
        })?;
        if v == 0 {
            return Err(AssetError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("{what} index 0 is invalid in OBJ"),
            });
        }
        Ok(v)
    };
    let v = parse(parts.next(), "vertex")?;
    let t = parse(parts.next(), "texture")?;
    Ok((resolve_index(v, n_vertices), resolve_index(t, n_uvs)))
}

fn parse_mtl(path: &Path) -> Result<HashMap<String, String>, AssetError> {
    let text = read_text(path)?;
    let mut maps = HashMap::new();
    let mut current: Option<String> = None;
    for raw in text.lines() {
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.first().copied() {
            Some("newmtl") if tokens.len() >= 2 => current = Some(tokens[1..].join(" ")),
            Some("map_Kd") if tokens.len() >= 2 => {
                if let Some(name) = &current {
                    // options such as `-s 1 1 1` precede the file name
                    maps.insert(name.clone(), tokens[tokens.len() - 1].to_string());
                }
            }
            _ => {}
        }
    }
    Ok(maps)
}

/// Parse an OBJ file (plus its MTL and texture) into a validated mesh.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TexturedMesh, AssetError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();

    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut uvs: Vec<[f64; 2]> = Vec::new();
    let mut faces: Vec<FaceRef> = Vec::new();
    let mut mtllib: Option<PathBuf> = None;
    let mut materials: Vec<String> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let Some((&head, rest)) = tokens.split_first() else {
            continue;
        };
        match head {
            "v" => vertices.push(parse_floats::<3>(path, line, rest, "vertex")?),
            "vt" => {
                let [u, v] = parse_floats::<2>(path, line, rest, "texture coordinate")?;
                if [u, v].iter().any(|c| *c < -UV_SLACK || *c > 1.0 + UV_SLACK) {
                    return Err(AssetError::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: format!("texture coordinate ({u}, {v}) outside [0,1]"),
                    });
                }
                uvs.push([u.clamp(0.0, 1.0), v.clamp(0.0, 1.0)]);
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(AssetError::NonTriangularFace {
                        path: path.to_path_buf(),
                        line,
                        corners: rest.len(),
                    });
                }
                let mut corners = [(0, 0); 3];
                for (c, tok) in corners.iter_mut().zip(rest) {
                    *c = parse_corner(path, line, tok, vertices.len(), uvs.len())?;
                }
                faces.push(FaceRef { line, corners });
            }
            "mtllib" if !rest.is_empty() => mtllib = Some(dir.join(rest.join(" "))),
            "usemtl" if !rest.is_empty() => {
                let name = rest.join(" ");
                if !materials.contains(&name) {
                    materials.push(name);
                }
            }
            _ => {}
        }
    }

    let mut tri = Vec::with_capacity(faces.len());
    let mut tri_uvs = Vec::with_capacity(faces.len());
    for face in &faces {
        let mut idx = [0u32; 3];
        let mut fuv = [[0.0; 2]; 3];
        for (k, &(v, t)) in face.corners.iter().enumerate() {
            if v < 0 || v as usize >= vertices.len() {
                return Err(AssetError::IndexOutOfRange {
                    path: path.to_path_buf(),
                    line: face.line,
                    kind: "vertex",
                    index: v + 1,
                    count: vertices.len(),
                });
            }
            if t < 0 || t as usize >= uvs.len() {
                return Err(AssetError::IndexOutOfRange {
                    path: path.to_path_buf(),
                    line: face.line,
                    kind: "texture",
                    index: t + 1,
                    count: uvs.len(),
                });
            }
            idx[k] = v as u32;
            fuv[k] = uvs[t as usize];
        }
        tri.push(idx);
        tri_uvs.push(fuv);
    }

    let texture_path = resolve_texture(path, mtllib.as_deref(), &materials)?;
    let texture = load_png(&texture_path, false).map_err(|e| match e {
        AssetError::MissingFile(p) => AssetError::MissingTexture {
            path: path.to_path_buf(),
            detail: format!("texture file {} does not exist", p.display()),
        },
        other => other,
    })?;

    TexturedMesh::new(vertices, tri, tri_uvs, texture)
}

fn resolve_texture(
    obj: &Path,
    mtllib: Option<&Path>,
    materials: &[String],
) -> Result<PathBuf, AssetError> {
    let missing = |detail: String| AssetError::MissingTexture {
        path: obj.to_path_buf(),
        detail,
    };
    let mtl = mtllib.ok_or_else(|| missing("no mtllib statement".into()))?;
    if !mtl.exists() {
        return Err(missing(format!("material library {} does not exist", mtl.display())));
    }
    let maps = parse_mtl(mtl)?;
    let name = match materials {
        [] => {
            // no usemtl: accept a library that defines exactly one textured material
            if maps.len() != 1 {
                return Err(missing("no usemtl statement".into()));
            }
            maps.keys().next().unwrap().clone()
        }
        [one] => one.clone(),
        many => {
            return Err(AssetError::InvalidMesh(format!(
                "{} uses {} materials; exactly one is supported",
                obj.display(),
                many.len()
            )))
        }
    };
    let file = maps
        .get(&name)
        .ok_or_else(|| missing(format!("material {name:?} has no map_Kd")))?;
    Ok(mtl.parent().unwrap_or(Path::new("")).join(file))
}

/// Write `mesh` as `path` plus a sibling `.mtl` and `_texture.png`.
pub fn save_mesh(mesh: &TexturedMesh, path: impl AsRef<Path>) -> Result<(), AssetError> {
    let path = path.as_ref();
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mesh")
        .to_string();
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mtl_name = format!("{stem}.mtl");
    let tex_name = format!("{stem}_texture.png");

    let mut obj = String::new();
    let _ = writeln!(obj, "mtllib {mtl_name}");
    for v in mesh.vertices() {
        let _ = writeln!(obj, "v {} {} {}", v[0], v[1], v[2]);
    }
    for uv in mesh.face_uvs() {
        for c in uv {
            let _ = writeln!(obj, "vt {} {}", c[0], c[1]);
        }
    }
    let _ = writeln!(obj, "usemtl material0");
    for (i, f) in mesh.faces().iter().enumerate() {
        let t = 3 * i + 1;
        let _ = writeln!(
            obj,
            "f {}/{} {}/{} {}/{}",
            f[0] + 1,
            t,
            f[1] + 1,
            t + 1,
            f[2] + 1,
            t + 2
        );
    }
    let mtl = format!("newmtl material0\nKd 1 1 1\nmap_Kd {tex_name}\n");

    let write = |p: PathBuf, s: &str| {
        fs::write(&p, s).map_err(|source| AssetError::Io { path: p, source })
    };
    write(path.to_path_buf(), &obj)?;
    write(dir.join(&mtl_name), &mtl)?;
    save_png(mesh.texture(), dir.join(&tex_name))
}
