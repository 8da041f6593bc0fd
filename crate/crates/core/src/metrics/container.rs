//! Binary embedding files and their JSONL label sidecars.
//!
//! Layout: 4-byte magic, `u32` row count, `u32` dimension (little-endian),
//! then `N·D` little-endian `f32` values in row-major order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MetricsError, ProbeSet};
use crate::matrix::Matrix;

pub const EMBEDDING_MAGIC: [u8; 4] = *b"EMBF";
const HEADER_LEN: usize = 12;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MetricsError + '_ {
    move |source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> MetricsError {
    MetricsError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn write_embeddings(path: impl AsRef<Path>, m: &Matrix) -> Result<(), MetricsError> {
    let path = path.as_ref();
    let too_big = || format_err(path, "matrix too large for a u32 header");
    let rows = u32::try_from(m.rows()).map_err(|_| too_big())?;
    let cols = u32::try_from(m.cols()).map_err(|_| too_big())?;
    let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * m.data().len());
    bytes.extend_from_slice(&EMBEDDING_MAGIC);
    bytes.extend_from_slice(&rows.to_le_bytes());
    bytes.extend_from_slice(&cols.to_le_bytes());
    for &v in m.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Matrix, MetricsError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < HEADER_LEN {
        return Err(format_err(path, "truncated header"));
    }
    if bytes[..4] != EMBEDDING_MAGIC {
        return Err(format_err(path, format!("bad magic {:?}", &bytes[..4])));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(format_err(
            path,
            format!("header says {rows}x{cols} but payload is {} bytes", bytes.len() - HEADER_LEN),
        ));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    Matrix::new(rows, cols, data).map_err(|e| format_err(path, e.to_string()))
}

/// Camera ids may be written as strings or integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum Label {
    Text(String),
    Number(i64),
}

impl Label {
    fn into_string(self) -> String {
        match self {
            Label::Text(s) => s,
            Label::Number(n) => n.to_string(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSidecarRow {
    identity: Label,
    camera: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SidecarRow {
    pub identity: String,
    pub camera: String,
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Vec<SidecarRow>, MetricsError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let raw: RawSidecarRow =
                serde_json::from_str(l).map_err(|e| format_err(path, format!("line {}: {e}", i + 1)))?;
            Ok(SidecarRow {
                identity: raw.identity.into_string(),
                camera: raw.camera.into_string(),
            })
        })
        .collect()
}

pub fn write_sidecar(path: impl AsRef<Path>, rows: &[SidecarRow]) -> Result<(), MetricsError> {
    let path = path.as_ref();
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("sidecar serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn load_probe_set(embeddings: impl AsRef<Path>, sidecar: impl AsRef<Path>) -> Result<ProbeSet, MetricsError> {
    let m = read_embeddings(embeddings)?;
    let rows = read_sidecar(sidecar)?;
    let (identities, cameras) = rows.into_iter().map(|r| (r.identity, r.camera)).unzip();
    ProbeSet::new(m, identities, cameras)
}
