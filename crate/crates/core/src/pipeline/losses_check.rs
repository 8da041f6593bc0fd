//! `losses-check`: evaluate the reference losses on matrices from a text file.
//!
//! The file holds `[section]` headers followed by whitespace-separated
//! values; `#` starts a comment. Matrix sections take one row per line:
//!
//! ```text
//! [logits]          # N×C identity logits
//! [labels]          # N class indices
//! [embeddings]      # N×D embeddings
//! [identities]      # N identity tokens
//! [domain_logits]   # N×2
//! [domains]         # N tokens: real | synthetic | 0 | 1
//! ```
//!
//! Each loss is computed when both of its sections are present; absent
//! losses contribute zero to the weighted total.

use serde::Serialize;

use super::PipelineError;
use crate::assets::Domain;
use crate::losses::{domain_loss, id_loss, total_loss, triplet_loss, LossConfig};
use crate::matrix::Matrix;

type Rows<'a> = Vec<(usize, Vec<&'a str>)>;

const SECTIONS: [&str; 6] = ["logits", "labels", "embeddings", "identities", "domain_logits", "domains"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossInputs {
    pub logits: Option<Matrix>,
    pub labels: Option<Vec<usize>>,
    pub embeddings: Option<Matrix>,
    pub identities: Option<Vec<String>>,
    pub domain_logits: Option<Matrix>,
    pub domains: Option<Vec<Domain>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triplet: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<f64>,
    pub total: f64,
}

fn invalid(line: usize, msg: impl std::fmt::Display) -> PipelineError {
    PipelineError::Validation(format!("line {line}: {msg}"))
}

fn matrix(rows: &[(usize, Vec<&str>)]) -> Result<Matrix, PipelineError> {
    let mut parsed = Vec::with_capacity(rows.len());
    for (line, tokens) in rows {
        let row = tokens
            .iter()
            .map(|t| t.parse::<f64>().map_err(|e| invalid(*line, format!("{t:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        parsed.push(row);
    }
    Matrix::from_rows(&parsed).map_err(|e| PipelineError::Validation(e.to_string()))
}

fn tokens<'a>(rows: &'a [(usize, Vec<&'a str>)]) -> impl Iterator<Item = (usize, &'a str)> {
    rows.iter().flat_map(|(line, ts)| ts.iter().map(move |t| (*line, *t)))
}

pub fn parse_loss_inputs(text: &str) -> Result<LossInputs, PipelineError> {
    let mut sections: Vec<(&str, Rows)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(invalid(i + 1, format!("unknown section [{name}]")));
            }
            if sections.iter().any(|(n, _)| *n == name) {
                return Err(invalid(i + 1, format!("duplicate section [{name}]")));
            }
            sections.push((name, Vec::new()));
            continue;
        }
        let (_, rows) = sections
            .last_mut()
            .ok_or_else(|| invalid(i + 1, "values before the first section header"))?;
        rows.push((i + 1, line.split_whitespace().collect()));
    }

    let mut inputs = LossInputs::default();
    for (name, rows) in &sections {
        match *name {
            "logits" => inputs.logits = Some(matrix(rows)?),
            "embeddings" => inputs.embeddings = Some(matrix(rows)?),
            "domain_logits" => inputs.domain_logits = Some(matrix(rows)?),
            "labels" => {
                inputs.labels = Some(
                    tokens(rows)
                        .map(|(l, t)| t.parse::<usize>().map_err(|e| invalid(l, format!("{t:?}: {e}"))))
                        .collect::<Result<_, _>>()?,
                )
            }
            "identities" => inputs.identities = Some(tokens(rows).map(|(_, t)| t.to_owned()).collect()),
            "domains" => {
                inputs.domains = Some(
                    tokens(rows)
                        .map(|(l, t)| match t {
                            "real" | "0" => Ok(Domain::Real),
                            "synthetic" | "1" => Ok(Domain::Synthetic),
                            other => Err(invalid(l, format!("unknown domain {other:?}"))),
                        })
                        .collect::<Result<_, _>>()?,
                )
            }
            _ => unreachable!("section names are checked while scanning"),
        }
    }
    Ok(inputs)
}

fn pair<A, B>(a: &Option<A>, b: &Option<B>, what: &str) -> Result<Option<(A, B)>, PipelineError>
where
    A: Clone,
    B: Clone,
{
    match (a, b) {
        (Some(a), Some(b)) => Ok(Some((a.clone(), b.clone()))),
        (None, None) => Ok(None),
        _ => Err(PipelineError::Validation(format!("{what} needs both of its sections"))),
    }
}

pub fn losses_check(inputs: &LossInputs, cfg: &LossConfig) -> Result<LossReport, PipelineError> {
    cfg.validate()?;
    let id = pair(&inputs.logits, &inputs.labels, "identity loss")?
        .map(|(m, l)| id_loss(&m, &l, cfg.label_smoothing))
        .transpose()?;
    let triplet = pair(&inputs.embeddings, &inputs.identities, "triplet loss")?
        .map(|(m, l)| triplet_loss(&m, &l, cfg.triplet_margin))
        .transpose()?;
    let domain = pair(&inputs.domain_logits, &inputs.domains, "domain loss")?
        .map(|(m, l)| domain_loss(&m, &l))
        .transpose()?;
    if id.is_none() && triplet.is_none() && domain.is_none() {
        return Err(PipelineError::Validation("no loss inputs found".into()));
    }
    let total = total_loss(
        id.unwrap_or(0.0),
        triplet.unwrap_or(0.0),
        domain.unwrap_or(0.0),
        &cfg.weights(),
    );
    Ok(LossReport {
        id,
        triplet,
        domain,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# uniform logits over 3 classes
[logits]
0 0 0
1 1 1
[labels]
0 2
[embeddings]
0 0
0 0
10 0   # far negative pair
10 0
[identities]
a a b b
[domain_logits]
0 0
[domains]
synthetic
";

    #[test]
    fn parses_and_evaluates_all_losses() {
        let inputs = parse_loss_inputs(SAMPLE).unwrap();
        assert_eq!(inputs.labels.as_deref(), Some(&[0, 2][..]));
        assert_eq!(inputs.embeddings.as_ref().unwrap().shape(), (4, 2));
        let r = losses_check(&inputs, &LossConfig::default()).unwrap();
        assert!((r.id.unwrap() - 3f64.ln()).abs() <= 1e-12);
        assert_eq!(r.triplet, Some(0.0));
        assert!((r.domain.unwrap() - std::f64::consts::LN_2).abs() <= 1e-12);
        assert!((r.total - (3f64.ln() + 0.5 * std::f64::consts::LN_2)).abs() <= 1e-12);
    }

    #[test]
    fn partial_inputs_and_errors() {
        let only = parse_loss_inputs("[domain_logits]\n0 0\n[domains]\n0\n").unwrap();
        let r = losses_check(&only, &LossConfig::default()).unwrap();
        assert_eq!(r.id, None);
        assert!((r.total - 0.5 * std::f64::consts::LN_2).abs() <= 1e-12);
        assert!(parse_loss_inputs("1 2 3").is_err());
        assert!(parse_loss_inputs("[weird]\n").is_err());
        assert!(parse_loss_inputs("[labels]\nx\n").is_err());
        assert!(parse_loss_inputs("[logits]\n1 2\n3\n").is_err());
        let half = parse_loss_inputs("[logits]\n1 2\n").unwrap();
        assert!(losses_check(&half, &LossConfig::default()).is_err());
        assert!(losses_check(&LossInputs::default(), &LossConfig::default()).is_err());
    }
}
