//! Forward reference values for the training objective.
//!
//! The objective is `λ_id·L_id + λ_tri·L_tri + λ_dom·L_dom`: label-smoothed
//! identity cross-entropy, batch-hard triplet on Euclidean distances, and a
//! two-class real/synthetic domain cross-entropy. Only forward values are
//! computed; they serve as oracles for external training code.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::Domain;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("row {row}: label {label} out of range for {classes} classes")]
    LabelOutOfRange { row: usize, label: usize, classes: usize },
    #[error("label smoothing must lie in [0, 1), got {0}")]
    InvalidSmoothing(f64),
    #[error("triplet margin must be non-negative, got {0}")]
    InvalidMargin(f64),
    #[error("row {0} is the only instance of its identity")]
    SingletonIdentity(usize),
    #[error("triplet loss needs at least two identities in the batch")]
    SingleIdentity,
    #[error("non-finite input values")]
    NonFinite,
    #[error("invalid loss weights: {0}")]
    InvalidWeights(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_id: f64,
    pub lambda_tri: f64,
    pub lambda_dom: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_id: 1.0,
            lambda_tri: 1.0,
            lambda_dom: 0.5,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        if [self.lambda_id, self.lambda_tri, self.lambda_dom]
            .iter()
            .any(|w| !(*w >= 0.0) || !w.is_finite())
        {
            return Err(LossError::InvalidWeights(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Loss hyperparameters as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub label_smoothing: f64,
    pub triplet_margin: f64,
    pub lambda_id: f64,
    pub lambda_tri: f64,
    pub lambda_dom: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            label_smoothing: 0.1,
            triplet_margin: 0.3,
            lambda_id: w.lambda_id,
            lambda_tri: w.lambda_tri,
            lambda_dom: w.lambda_dom,
        }
    }
}

impl LossConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda_id: self.lambda_id,
            lambda_tri: self.lambda_tri,
            lambda_dom: self.lambda_dom,
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(LossError::InvalidSmoothing(self.label_smoothing));
        }
        if !(self.triplet_margin >= 0.0) {
            return Err(LossError::InvalidMargin(self.triplet_margin));
        }
        self.weights().validate()
    }
}

/// Mean cross-entropy against smoothed one-hot targets: the true class gets
/// `1 − ε + ε/C`, every other class `ε/C`.
pub fn id_loss(logits: &Matrix, labels: &[usize], smoothing: f64) -> Result<f64, LossError> {
    if !(0.0..1.0).contains(&smoothing) {
        return Err(LossError::InvalidSmoothing(smoothing));
    }
    let (n, c) = logits.shape();
    if n == 0 || c == 0 || labels.len() != n {
        return Err(LossError::Shape(format!(
            "{n}x{c} logits with {} labels",
            labels.len()
        )));
    }
    if !logits.is_finite() {
        return Err(LossError::NonFinite);
    }
    let off = smoothing / c as f64;
    let on = 1.0 - smoothing + off;
    let mut total = 0.0;
    for (row, (x, &label)) in logits.iter_rows().zip(labels).enumerate() {
        if label >= c {
            return Err(LossError::LabelOutOfRange { row, label, classes: c });
        }
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += x
            .iter()
            .enumerate()
            .map(|(j, v)| -(if j == label { on } else { off }) * (v - lse))
            .sum::<f64>();
    }
    Ok(total / n as f64)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Batch-hard triplet loss: per anchor, the farthest same-identity row and
/// the nearest different-identity row, hinged at `margin`, averaged.
pub fn triplet_loss<T: PartialEq>(emb: &Matrix, labels: &[T], margin: f64) -> Result<f64, LossError> {
    if !(margin >= 0.0) {
        return Err(LossError::InvalidMargin(margin));
    }
    let n = emb.rows();
    if n == 0 || emb.cols() == 0 || labels.len() != n {
        return Err(LossError::Shape(format!(
            "{n}x{} embeddings with {} labels",
            emb.cols(),
            labels.len()
        )));
    }
    if !emb.is_finite() {
        return Err(LossError::NonFinite);
    }
    let mut total = 0.0;
    for a in 0..n {
        let mut hardest_pos = None::<f64>;
        let mut hardest_neg = None::<f64>;
        for b in 0..n {
            if a == b {
                continue;
            }
            let d = euclidean(emb.row(a), emb.row(b));
            if labels[a] == labels[b] {
                hardest_pos = Some(hardest_pos.map_or(d, |p| p.max(d)));
            } else {
                hardest_neg = Some(hardest_neg.map_or(d, |q| q.min(d)));
            }
        }
        let d_ap = hardest_pos.ok_or(LossError::SingletonIdentity(a))?;
        let d_an = hardest_neg.ok_or(LossError::SingleIdentity)?;
        total += (margin + d_ap - d_an).max(0.0);
    }
    Ok(total / n as f64)
}

/// Two-class real (0) / synthetic (1) cross-entropy without smoothing.
pub fn domain_loss(logits: &Matrix, labels: &[Domain]) -> Result<f64, LossError> {
    if logits.cols() != 2 {
        return Err(LossError::Shape(format!(
            "domain logits need 2 columns, got {}",
            logits.cols()
        )));
    }
    let classes: Vec<usize> = labels
        .iter()
        .map(|d| match d {
            Domain::Real => 0,
            Domain::Synthetic => 1,
        })
        .collect();
    id_loss(logits, &classes, 0.0)
}

pub fn total_loss(l_id: f64, l_tri: f64, l_dom: f64, w: &LossWeights) -> f64 {
    w.lambda_id * l_id + w.lambda_tri * l_tri + w.lambda_dom * l_dom
}
