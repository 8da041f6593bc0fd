//! Query → gallery retrieval evaluation: CMC curve, Rank-1 and mAP.

mod container;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use container::{
    load_probe_set, read_embeddings, read_sidecar, write_embeddings, write_sidecar, SidecarRow, EMBEDDING_MAGIC,
};

use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("{embeddings} embeddings but {labels} labels")]
    LengthMismatch { embeddings: usize, labels: usize },
    #[error("embeddings contain non-finite values")]
    NonFinite,
    #[error("empty {0} set")]
    Empty(&'static str),
    #[error("max_rank must be at least 1")]
    InvalidMaxRank,
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Embeddings with per-row identity and camera labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    embeddings: Matrix,
    identities: Vec<String>,
    cameras: Vec<String>,
}

impl ProbeSet {
    pub fn new(embeddings: Matrix, identities: Vec<String>, cameras: Vec<String>) -> Result<Self, MetricsError> {
        for labels in [identities.len(), cameras.len()] {
            if labels != embeddings.rows() {
                return Err(MetricsError::LengthMismatch {
                    embeddings: embeddings.rows(),
                    labels,
                });
            }
        }
        if !embeddings.is_finite() {
            return Err(MetricsError::NonFinite);
        }
        Ok(Self {
            embeddings,
            identities,
            cameras,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub fn identities(&self) -> &[String] {
        &self.identities
    }

    pub fn cameras(&self) -> &[String] {
        &self.cameras
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// `1 − ⟨q̂, ĝ⟩` on L2-normalized rows; zero rows stay zero.
    #[default]
    Cosine,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Length of the reported CMC curve.
    pub max_rank: usize,
    pub distance: DistanceMetric,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            max_rank: 50,
            distance: DistanceMetric::Cosine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    #[serde(rename = "mAP")]
    pub mean_ap: f64,
    pub rank1: f64,
    /// `cmc[k-1]` is the fraction of evaluated queries matched within rank k.
    pub cmc: Vec<f64>,
    /// Queries with at least one relevant gallery row after exclusion.
    pub num_queries: usize,
    pub distance: DistanceMetric,
}

fn normalized(row: &[f64]) -> Vec<f64> {
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        vec![0.0; row.len()]
    } else {
        row.iter().map(|v| v / norm).collect()
    }
}

pub fn pairwise_distances(q: &ProbeSet, g: &ProbeSet, metric: DistanceMetric) -> Result<Matrix, MetricsError> {
    if q.dim() != g.dim() {
        return Err(MetricsError::DimensionMismatch(q.dim(), g.dim()));
    }
    let mut out = Matrix::zeros(q.len(), g.len());
    match metric {
        DistanceMetric::Cosine => {
            let gn: Vec<Vec<f64>> = g.embeddings.iter_rows().map(normalized).collect();
            for (i, qr) in q.embeddings.iter_rows().enumerate() {
                let qn = normalized(qr);
                for (j, gr) in gn.iter().enumerate() {
                    out.set(i, j, 1.0 - qn.iter().zip(gr).map(|(a, b)| a * b).sum::<f64>());
                }
            }
        }
        DistanceMetric::Euclidean => {
            for (i, qr) in q.embeddings.iter_rows().enumerate() {
                for (j, gr) in g.embeddings.iter_rows().enumerate() {
                    out.set(i, j, qr.iter().zip(gr).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
                }
            }
        }
    }
    Ok(out)
}

/// AP and first-hit rank (1-based) of one query, or `None` without relevant rows.
fn score_query(distances: &[f64], q: usize, query: &ProbeSet, gallery: &ProbeSet) -> Option<(f64, usize)> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    let (qid, qcam) = (&query.identities[q], &query.cameras[q]);
    let mut rank = 0;
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    let mut first_hit = None;
    for j in order {
        let same_id = gallery.identities[j] == *qid;
        if same_id && gallery.cameras[j] == *qcam {
            continue;
        }
        rank += 1;
        if same_id {
            hits += 1;
            precision_sum += hits as f64 / rank as f64;
            first_hit.get_or_insert(rank);
        }
    }
    first_hit.map(|r| (precision_sum / hits as f64, r))
}

pub fn evaluate(query: &ProbeSet, gallery: &ProbeSet, cfg: &MetricsConfig) -> Result<EvalResult, MetricsError> {
    if query.is_empty() {
        return Err(MetricsError::Empty("query"));
    }
    if gallery.is_empty() {
        return Err(MetricsError::Empty("gallery"));
    }
    if cfg.max_rank == 0 {
        return Err(MetricsError::InvalidMaxRank);
    }
    let dist = pairwise_distances(query, gallery, cfg.distance)?;
    let scored: Vec<Option<(f64, usize)>> = (0..query.len())
        .into_par_iter()
        .map(|q| score_query(dist.row(q), q, query, gallery))
        .collect();
    let mut ap_sum = 0.0;
    let mut first_hits = vec![0usize; cfg.max_rank];
    let mut evaluated = 0usize;
    for (ap, first) in scored.into_iter().flatten() {
        evaluated += 1;
        ap_sum += ap;
        if first <= cfg.max_rank {
            first_hits[first - 1] += 1;
        }
    }
    if evaluated == 0 {
        return Ok(EvalResult {
            mean_ap: 0.0,
            rank1: 0.0,
            cmc: vec![0.0; cfg.max_rank],
            num_queries: 0,
            distance: cfg.distance,
        });
    }
    let mut cumulative = 0usize;
    let cmc: Vec<f64> = first_hits
        .iter()
        .map(|h| {
            cumulative += h;
            cumulative as f64 / evaluated as f64
        })
        .collect();
    Ok(EvalResult {
        mean_ap: ap_sum / evaluated as f64,
        rank1: cmc[0],
        cmc,
        num_queries: evaluated,
        distance: cfg.distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn probe(rows: &[&[f64]], ids: &[&str], cams: &[&str]) -> ProbeSet {
        ProbeSet::new(
            Matrix::from_rows(rows).unwrap(),
            ids.iter().map(|s| s.to_string()).collect(),
            cams.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn cosine_distance_cases() {
        let q = probe(&[&[1.0, 0.0]], &["a"], &["c"]);
        let g = probe(&[&[2.0, 0.0], &[0.0, 3.0], &[-1.0, 0.0], &[0.0, 0.0]], &["a"; 4], &["d"; 4]);
        let d = pairwise_distances(&q, &g, DistanceMetric::Cosine).unwrap();
        assert_eq!(d.row(0), &[0.0, 1.0, 2.0, 1.0]);
        let e = pairwise_distances(&q, &g, DistanceMetric::Euclidean).unwrap();
        assert_eq!(e.row(0), &[1.0, 10f64.sqrt(), 2.0, 1.0]);
        let bad = probe(&[&[1.0]], &["a"], &["c"]);
        assert!(matches!(
            pairwise_distances(&bad, &g, DistanceMetric::Cosine),
            Err(MetricsError::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn perfect_single_query() {
        let q = probe(&[&[1.0, 0.0]], &["a"], &["c1"]);
        let g = probe(&[&[1.0, 0.1], &[0.0, 1.0]], &["a", "b"], &["c2", "c2"]);
        let r = evaluate(&q, &g, &MetricsConfig::default()).unwrap();
        assert_eq!((r.mean_ap, r.rank1, r.num_queries), (1.0, 1.0, 1));
        assert_eq!(r.cmc.len(), 50);
        assert!(r.cmc.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn relevant_at_ranks_one_and_three() {
        let q = probe(&[&[1.0, 0.0]], &["a"], &["c1"]);
        let g = probe(
            &[&[1.0, 0.0], &[1.0, 0.5], &[1.0, 1.0], &[0.0, 1.0]],
            &["a", "b", "a", "b"],
            &["c2"; 4],
        );
        let r = evaluate(&q, &g, &MetricsConfig { max_rank: 4, ..Default::default() }).unwrap();
        assert_eq!(r.mean_ap, (1.0 + 2.0 / 3.0) / 2.0);
        assert_eq!(r.cmc, vec![1.0; 4]);
    }

    #[test]
    fn same_identity_same_camera_excluded() {
        let q = probe(&[&[1.0, 0.0]], &["a"], &["c1"]);
        // The closest row is the same identity from the same camera: excluded.
        let g = probe(&[&[1.0, 0.0], &[0.9, 0.5], &[0.5, 1.0]], &["a", "b", "a"], &["c1", "c2", "c2"]);
        let r = evaluate(&q, &g, &MetricsConfig { max_rank: 3, ..Default::default() }).unwrap();
        assert_eq!(r.mean_ap, 0.5);
        assert_eq!(r.cmc, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn queries_without_relevant_rows_are_skipped() {
        let q = probe(&[&[1.0], &[1.0]], &["a", "z"], &["c", "c"]);
        let g = probe(&[&[1.0], &[-1.0]], &["b", "a"], &["d", "d"]);
        let r = evaluate(&q, &g, &MetricsConfig { max_rank: 2, ..Default::default() }).unwrap();
        assert_eq!(r.num_queries, 1);
        assert_eq!(r.mean_ap, 0.5);
        assert_eq!(r.cmc, vec![0.0, 1.0]);
        let none = probe(&[&[1.0]], &["z"], &["c"]);
        let r = evaluate(&none, &g, &MetricsConfig::default()).unwrap();
        assert_eq!((r.num_queries, r.mean_ap, r.rank1), (0, 0.0, 0.0));
    }

    #[test]
    fn ties_broken_by_gallery_index() {
        let q = probe(&[&[1.0, 0.0]], &["a"], &["c1"]);
        let g = probe(&[&[1.0, 0.0], &[2.0, 0.0]], &["b", "a"], &["c2", "c2"]);
        let r = evaluate(&q, &g, &MetricsConfig { max_rank: 2, ..Default::default() }).unwrap();
        assert_eq!(r.mean_ap, 0.5);
    }

    #[test]
    fn invalid_inputs() {
        assert!(ProbeSet::new(Matrix::zeros(2, 3), vec!["a".into()], vec!["c".into(); 2]).is_err());
        assert!(ProbeSet::new(Matrix::new(1, 1, vec![f64::NAN]).unwrap(), vec!["a".into()], vec!["c".into()]).is_err());
        let empty = ProbeSet::new(Matrix::zeros(0, 2), vec![], vec![]).unwrap();
        let one = probe(&[&[1.0, 0.0]], &["a"], &["c"]);
        assert!(matches!(evaluate(&empty, &one, &MetricsConfig::default()), Err(MetricsError::Empty("query"))));
        assert!(matches!(evaluate(&one, &empty, &MetricsConfig::default()), Err(MetricsError::Empty("gallery"))));
        assert!(evaluate(&one, &one, &MetricsConfig { max_rank: 0, ..Default::default() }).is_err());
    }

    fn instance() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, Vec<usize>, Vec<usize>)> {
        (1..=4usize, 1..=8usize, 1..=4usize).prop_flat_map(|(nq, ng, d)| {
            (
                Just(nq),
                Just(ng),
                Just(d),
                proptest::collection::vec(-2.0..2.0f64, (nq + ng) * d),
                proptest::collection::vec(0..3usize, nq + ng),
                proptest::collection::vec(0..2usize, nq + ng),
            )
        })
    }

    fn split(nq: usize, ng: usize, d: usize, vals: &[f64], ids: &[usize], cams: &[usize]) -> (ProbeSet, ProbeSet) {
        let make = |range: std::ops::Range<usize>| {
            ProbeSet::new(
                Matrix::new(range.len(), d, vals[range.start * d..range.end * d].to_vec()).unwrap(),
                ids[range.clone()].iter().map(|i| i.to_string()).collect(),
                cams[range].iter().map(|c| c.to_string()).collect(),
            )
            .unwrap()
        };
        (make(0..nq), make(nq..nq + ng))
    }

    proptest! {
        #[test]
        fn cmc_monotone_and_bounded((nq, ng, d, vals, ids, cams) in instance()) {
            let (q, g) = split(nq, ng, d, &vals, &ids, &cams);
            let r = evaluate(&q, &g, &MetricsConfig { max_rank: 8, ..Default::default() }).unwrap();
            prop_assert!(r.cmc.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!((0.0..=1.0).contains(&r.mean_ap));
            prop_assert_eq!(r.rank1, r.cmc[0]);
            if r.num_queries > 0 {
                prop_assert_eq!(*r.cmc.last().unwrap(), 1.0);
            }
        }

        #[test]
        fn positive_row_scaling_invariant((nq, ng, d, vals, ids, cams) in instance(), s in proptest::collection::vec(0.1..10.0f64, 12)) {
            let (q, g) = split(nq, ng, d, &vals, &ids, &cams);
            let scaled: Vec<f64> = vals.iter().enumerate().map(|(i, v)| v * s[i / d]).collect();
            let (q2, g2) = split(nq, ng, d, &scaled, &ids, &cams);
            // Rescaling moves cosine distances by rounding error only, which can
            // reorder near-ties; those instances say nothing about the ranking.
            let dist = pairwise_distances(&q, &g, DistanceMetric::Cosine).unwrap();
            let near_tie = (0..nq).any(|i| {
                let r = dist.row(i);
                (0..ng).any(|a| (a + 1..ng).any(|b| (r[a] - r[b]).abs() < 1e-9))
            });
            prop_assume!(!near_tie);
            let cfg = MetricsConfig { max_rank: 8, ..Default::default() };
            prop_assert_eq!(evaluate(&q, &g, &cfg).unwrap(), evaluate(&q2, &g2, &cfg).unwrap());
        }

        #[test]
        fn duplicated_gallery_keeps_rank1((nq, ng, d, vals, ids, cams) in instance()) {
            // Gallery cameras never match query cameras, so nothing is excluded.
            let gcams: Vec<usize> = cams.iter().enumerate().map(|(i, c)| if i < nq { *c } else { c + 10 }).collect();
            let (q, g) = split(nq, ng, d, &vals, &ids, &gcams);
            let mut rows: Vec<Vec<f64>> = g.embeddings().iter_rows().map(<[f64]>::to_vec).collect();
            rows.extend(rows.clone());
            let mut gid = g.identities().to_vec();
            gid.extend(g.identities().to_vec());
            let mut gcam = g.cameras().to_vec();
            gcam.extend(g.cameras().iter().map(|c| format!("dup-{c}")));
            let g2 = ProbeSet::new(Matrix::from_rows(&rows).unwrap(), gid, gcam).unwrap();
            let cfg = MetricsConfig { max_rank: 16, ..Default::default() };
            let (a, b) = (evaluate(&q, &g, &cfg).unwrap(), evaluate(&q, &g2, &cfg).unwrap());
            prop_assert_eq!(a.num_queries, b.num_queries);
            prop_assert_eq!(a.rank1, b.rank1);
        }
    }
}
