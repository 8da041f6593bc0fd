//! JSON Lines dataset manifests.
//!
//! One [`SampleRecord`] per line with the canonical field order
//! `identity, image, mask, mesh, domain, view, delta_theta, delta_phi`.
//! The image path doubles as the stable record id.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AssetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Real,
    Synthetic,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Real => "real",
            Domain::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub identity: String,
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
    pub domain: Domain,
    #[serde(default)]
    pub view: String,
    #[serde(default)]
    pub delta_theta: f64,
    #[serde(default)]
    pub delta_phi: f64,
}

impl SampleRecord {
    pub fn real(identity: impl Into<String>, image: impl Into<String>) -> Self {
        Self {
            identity: identity.into(),
            image: image.into(),
            mask: None,
            mesh: None,
            domain: Domain::Real,
            view: String::new(),
            delta_theta: 0.0,
            delta_phi: 0.0,
        }
    }

    pub fn synthetic(
        identity: impl Into<String>,
        image: impl Into<String>,
        delta_theta: f64,
        delta_phi: f64,
    ) -> Self {
        Self {
            domain: Domain::Synthetic,
            delta_theta,
            delta_phi,
            ..Self::real(identity, image)
        }
    }

    pub fn record_id(&self) -> &str {
        &self.image
    }

    pub fn is_real(&self) -> bool {
        self.domain == Domain::Real
    }

    fn validate(&self, delta_theta_max: f64) -> Result<(), String> {
        if self.identity.is_empty() {
            return Err("empty identity label".into());
        }
        if self.image.is_empty() {
            return Err("empty image path".into());
        }
        if !self.delta_theta.is_finite() || !self.delta_phi.is_finite() {
            return Err("non-finite delta value".into());
        }
        if self.delta_theta.abs() > delta_theta_max {
            return Err(format!(
                "|delta_theta| = {} exceeds {delta_theta_max}",
                self.delta_theta.abs()
            ));
        }
        if self.is_real() && (self.delta_theta != 0.0 || self.delta_phi != 0.0) {
            return Err("real rows must have zero delta_theta and delta_phi".into());
        }
        Ok(())
    }
}

/// An ordered, validated list of sample records with unique record ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    records: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn new(records: Vec<SampleRecord>, delta_theta_max: f64) -> Result<Self, AssetError> {
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            r.validate(delta_theta_max)
                .map_err(|message| AssetError::Manifest { line: i + 1, message })?;
            if !seen.insert(r.record_id()) {
                return Err(AssetError::Manifest {
                    line: i + 1,
                    message: format!("duplicate record id {:?}", r.record_id()),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn real(&self) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(|r| r.is_real())
    }

    pub fn synthetic(&self) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(|r| !r.is_real())
    }

    pub fn find(&self, record_id: &str) -> Option<&SampleRecord> {
        self.records.iter().find(|r| r.record_id() == record_id)
    }

    /// Concatenate two manifests, re-checking id uniqueness.
    pub fn merged(&self, other: &DatasetManifest, delta_theta_max: f64) -> Result<Self, AssetError> {
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        Self::new(records, delta_theta_max)
    }

    pub fn parse(text: &str, delta_theta_max: f64) -> Result<Self, AssetError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: SampleRecord = serde_json::from_str(line).map_err(|e| AssetError::Manifest {
                line: i + 1,
                message: e.to_string(),
            })?;
            rec.validate(delta_theta_max)
                .map_err(|message| AssetError::Manifest { line: i + 1, message })?;
            records.push(rec);
        }
        Self::new(records, delta_theta_max)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>, delta_theta_max: f64) -> Result<Self, AssetError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(AssetError::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|source| AssetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, delta_theta_max)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AssetError> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|source| AssetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
