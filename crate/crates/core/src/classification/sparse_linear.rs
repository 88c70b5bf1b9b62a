use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{
    activate, check_training_set, cross_entropy, minibatches, residual_in_place, Capabilities,
    ClassifierKind, TextClassifier, TrainConfig,
};
use crate::corpus::{FeatureSet, LabelSet, LabelSpace, SparseMatrix};
use crate::error::{Error, Result};
use crate::rng::splitmix64;

pub const PROJECTION_DIM: usize = 256;

/// Linear model over TF-IDF rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseLinear {
    pub label_space: LabelSpace,
    pub config: TrainConfig,
    /// `C × V` head weights.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub projection_dim: usize,
}

impl SparseLinear {
    pub fn fit(
        features: &FeatureSet,
        rows: &[usize],
        labels: &[LabelSet],
        label_space: &LabelSpace,
        config: &TrainConfig,
    ) -> Result<Self> {
        Ok(Self::fit_traced(features, rows, labels, label_space, config)?.0)
    }

    /// Trains and returns the full training objective after every epoch.
    pub fn fit_traced(
        features: &FeatureSet,
        rows: &[usize],
        labels: &[LabelSet],
        label_space: &LabelSpace,
        config: &TrainConfig,
    ) -> Result<(Self, Vec<f64>)> {
        check_training_set(rows, labels)?;
        config.validate()?;
        for l in labels {
            label_space.validate(l)?;
        }
        let classes = label_space.num_classes();
        let vocab = features.vocab_size();
        let mut model = Self {
            label_space: label_space.clone(),
            config: config.clone(),
            weights: Array2::zeros((classes, vocab)),
            bias: Array1::zeros(classes),
            projection_dim: PROJECTION_DIM,
        };
        let target: std::collections::HashMap<usize, &LabelSet> =
            rows.iter().copied().zip(labels.iter()).collect();
        let x = features.tfidf();
        let lr = config.learning_rate;
        let shrink = 1.0 / (1.0 + lr * config.l2);
        let mut trace = Vec::with_capacity(config.epochs);

        for epoch in minibatches(rows, config) {
            for batch in epoch {
                let scale = 1.0 / batch.len() as f64;
                let mut grad_entries: Vec<(usize, usize, f64)> = Vec::new();
                let mut grad_bias = vec![0.0; classes];
                for &r in &batch {
                    let mut p = model.probs_row(x, r);
                    residual_in_place(&mut p, target[&r]);
                    let (cols, vals) = x.row(r);
                    for (c, &g) in p.iter().enumerate() {
                        grad_bias[c] += g * scale;
                        for (&j, &v) in cols.iter().zip(vals) {
                            grad_entries.push((c, j, g * v * scale));
                        }
                    }
                }
                model.weights.mapv_inplace(|w| w * shrink);
                for (c, j, g) in grad_entries {
                    model.weights[[c, j]] -= lr * g * shrink;
                }
                for (c, g) in grad_bias.iter().enumerate() {
                    model.bias[c] -= lr * g;
                }
            }
            trace.push(model.objective(features, rows, labels));
        }
        Ok((model, trace))
    }

    fn logits_row(&self, x: &SparseMatrix, r: usize) -> Vec<f64> {
        let (cols, vals) = x.row(r);
        (0..self.bias.len())
            .map(|c| {
                self.bias[c]
                    + cols
                        .iter()
                        .zip(vals)
                        .map(|(&j, &v)| self.weights[[c, j]] * v)
                        .sum::<f64>()
            })
            .collect()
    }

    fn probs_row(&self, x: &SparseMatrix, r: usize) -> Vec<f64> {
        let mut z = self.logits_row(x, r);
        activate(&mut z, self.label_space.mode);
        z
    }

    /// Mean cross-entropy over `rows` plus `λ‖W‖²/2`.
    pub fn objective(&self, features: &FeatureSet, rows: &[usize], labels: &[LabelSet]) -> f64 {
        let x = features.tfidf();
        let data: f64 = rows
            .iter()
            .zip(labels)
            .map(|(&r, l)| cross_entropy(&self.probs_row(x, r), l, self.label_space.mode))
            .sum::<f64>()
            / rows.len() as f64;
        data + 0.5 * self.config.l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    fn check_width(&self, features: &FeatureSet) -> Result<()> {
        if features.vocab_size() != self.weights.ncols() {
            return Err(Error::WidthMismatch {
                expected: self.weights.ncols(),
                actual: features.vocab_size(),
            });
        }
        Ok(())
    }

    /// Sign of the projection entry for vocabulary column `col`, output `j`.
    fn projection_sign(&self, col: usize, j: usize) -> f64 {
        let h = splitmix64(
            self.config.seed ^ splitmix64((col as u64) * self.projection_dim as u64 + j as u64),
        );
        if h & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl TextClassifier for SparseLinear {
    fn capabilities(&self) -> Capabilities {
        ClassifierKind::SparseLinear.capabilities(self.label_space.mode)
    }

    fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    fn predict_proba(&self, features: &FeatureSet, rows: &[usize]) -> Result<Array2<f64>> {
        self.check_width(features)?;
        let c = self.label_space.num_classes();
        let mut out = Array2::zeros((rows.len(), c));
        for (i, &r) in rows.iter().enumerate() {
            let p = self.probs_row(features.tfidf(), r);
            out.row_mut(i).assign(&Array1::from(p));
        }
        Ok(out)
    }

    /// Fixed ±1/√d random projection of the TF-IDF row, seeded by the
    /// training seed.
    fn embed(&self, features: &FeatureSet, rows: &[usize]) -> Result<Array2<f64>> {
        self.check_width(features)?;
        let d = self.projection_dim;
        let scale = 1.0 / (d as f64).sqrt();
        let mut out = Array2::zeros((rows.len(), d));
        for (i, &r) in rows.iter().enumerate() {
            let (cols, vals) = features.tfidf().row(r);
            for (&col, &v) in cols.iter().zip(vals) {
                for j in 0..d {
                    out[[i, j]] += v * scale * self.projection_sign(col, j);
                }
            }
        }
        Ok(out)
    }
}
