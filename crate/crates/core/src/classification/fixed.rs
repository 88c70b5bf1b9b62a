use ndarray::{Array2, Axis};

use super::{Capabilities, TextClassifier};
use crate::corpus::{FeatureSet, LabelMode, LabelSpace};
use crate::error::{Error, Result};

/// Classifier returning precomputed probabilities and embeddings, indexed by
/// row. Lets strategies run on hand-built inputs.
#[derive(Debug, Clone)]
pub struct FixedClassifier {
    pub space: LabelSpace,
    pub probs: Array2<f64>,
    pub embeddings: Option<Array2<f64>>,
}

impl FixedClassifier {
    pub fn new(probs: Array2<f64>) -> Self {
        let names = (0..probs.ncols().max(2)).map(|c| format!("c{c}")).collect();
        Self {
            space: LabelSpace::new(LabelMode::SingleLabel, names).expect("generated names are valid"),
            probs,
            embeddings: None,
        }
    }

    pub fn with_embeddings(mut self, e: Array2<f64>) -> Self {
        self.embeddings = Some(e);
        self
    }

    pub fn multi_label(mut self) -> Self {
        self.space.mode = LabelMode::MultiLabel;
        self
    }

    /// A placeholder feature set with one row per probability row.
    pub fn features(&self) -> FeatureSet {
        FeatureSet::from_tokens(1, vec![vec![0]; self.probs.nrows()])
    }
}

impl TextClassifier for FixedClassifier {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            probabilities: true,
            embeddings: self.embeddings.is_some(),
            ..Capabilities::NONE
        }
    }

    fn label_space(&self) -> &LabelSpace {
        &self.space
    }

    fn predict_proba(&self, _features: &FeatureSet, rows: &[usize]) -> Result<Array2<f64>> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.probs.nrows()) {
            return Err(Error::IndexOutOfRange(bad));
        }
        Ok(self.probs.select(Axis(0), rows))
    }

    fn embed(&self, _features: &FeatureSet, rows: &[usize]) -> Result<Array2<f64>> {
        let e = self
            .embeddings
            .as_ref()
            .ok_or(Error::MissingCapability("embeddings"))?;
        if let Some(&bad) = rows.iter().find(|&&r| r >= e.nrows()) {
            return Err(Error::IndexOutOfRange(bad));
        }
        Ok(e.select(Axis(0), rows))
    }
}
