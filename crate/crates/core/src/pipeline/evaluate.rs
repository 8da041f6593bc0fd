//! `evaluate`: score query embeddings against a gallery.

use std::path::Path;

use super::{write_file, PipelineError};
use crate::metrics::{evaluate, load_probe_set, EvalResult, MetricsConfig};

pub const EVAL_FILE: &str = "eval.json";

/// Evaluate and, when `out_dir` is given, write `eval.json` there.
pub fn run_evaluate(
    query: (&Path, &Path),
    gallery: (&Path, &Path),
    cfg: &MetricsConfig,
    out_dir: Option<&Path>,
) -> Result<EvalResult, PipelineError> {
    let q = load_probe_set(query.0, query.1)?;
    let g = load_probe_set(gallery.0, gallery.1)?;
    let result = evaluate(&q, &g, cfg)?;
    if let Some(dir) = out_dir {
        let json = serde_json::to_string(&result).expect("result serializes");
        write_file(&dir.join(EVAL_FILE), &(json + "\n"))?;
    }
    Ok(result)
}
