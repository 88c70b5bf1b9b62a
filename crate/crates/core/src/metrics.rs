//! Classification metrics for learning curves.

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSet, LabelSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Exact-match accuracy (subset accuracy for multi-label).
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

fn f1(tp: f64, fp: f64, fn_: f64) -> f64 {
    let denom = 2.0 * tp + fp + fn_;
    if denom == 0.0 {
        0.0
    } else {
        2.0 * tp / denom
    }
}

/// Accuracy, micro-F1 and macro-F1 from per-class membership counts. For
/// single-label data every label set has exactly one member, so micro-F1
/// equals accuracy.
pub fn compute_metrics(y_true: &[LabelSet], y_pred: &[LabelSet], space: &LabelSpace) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidParameter("metrics need at least one example".into()));
    }
    let c = space.num_classes();
    let (mut tp, mut fp, mut fn_) = (vec![0.0; c], vec![0.0; c], vec![0.0; c]);
    let mut exact = 0usize;
    for (t, p) in y_true.iter().zip(y_pred) {
        if t == p {
            exact += 1;
        }
        for class in 0..c {
            match (t.contains(class), p.contains(class)) {
                (true, true) => tp[class] += 1.0,
                (false, true) => fp[class] += 1.0,
                (true, false) => fn_[class] += 1.0,
                (false, false) => {}
            }
        }
    }
    let macro_f1 = (0..c).map(|k| f1(tp[k], fp[k], fn_[k])).sum::<f64>() / c as f64;
    let micro_f1 = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    Ok(Metrics {
        accuracy: exact as f64 / y_true.len() as f64,
        micro_f1,
        macro_f1,
    })
}
