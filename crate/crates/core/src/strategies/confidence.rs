use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{top_k_result, QueryRequest, QueryResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMode {
    LeastConfidence,
    Entropy,
    /// Breaking ties: one minus the gap between the two largest probabilities.
    Margin,
}

fn xlnx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Per-row uncertainty, larger = more uncertain.
///
/// For multi-label rows each class is treated as an independent Bernoulli
/// variable and the per-class scores are averaged.
pub fn uncertainty_scores(
    probs: ArrayView2<f64>,
    mode: UncertaintyMode,
    multi_label: bool,
) -> Result<Vec<f64>> {
    let classes = probs.ncols();
    if classes < 2 {
        return Err(Error::InvalidParameter(format!(
            "uncertainty needs at least 2 classes, got {classes}"
        )));
    }
    let scores = probs
        .rows()
        .into_iter()
        .map(|p| {
            if multi_label {
                let c = classes as f64;
                match mode {
                    UncertaintyMode::LeastConfidence => {
                        p.iter().map(|&q| 1.0 - q.max(1.0 - q)).sum::<f64>() / c
                    }
                    UncertaintyMode::Entropy => {
                        p.iter().map(|&q| -(xlnx(q) + xlnx(1.0 - q))).sum::<f64>() / c
                    }
                    UncertaintyMode::Margin => {
                        1.0 - p.iter().map(|&q| (2.0 * q - 1.0).abs()).sum::<f64>() / c
                    }
                }
            } else {
                match mode {
                    UncertaintyMode::LeastConfidence => {
                        1.0 - p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    }
                    UncertaintyMode::Entropy => -p.iter().map(|&q| xlnx(q)).sum::<f64>(),
                    UncertaintyMode::Margin => {
                        let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                        for &q in p.iter() {
                            if q > first {
                                second = first;
                                first = q;
                            } else if q > second {
                                second = q;
                            }
                        }
                        1.0 - (first - second)
                    }
                }
            }
        })
        .collect();
    Ok(scores)
}

pub fn query_confidence(req: &mut QueryRequest<'_>, mode: UncertaintyMode) -> Result<QueryResult> {
    req.check_batch()?;
    let probs = req.classifier.predict_proba(req.features, &req.candidates)?;
    let multi = req.classifier.label_space().is_multi_label();
    let scores = uncertainty_scores(probs.view(), mode, multi)?;
    Ok(top_k_result(&req.candidates, scores, req.k))
}
