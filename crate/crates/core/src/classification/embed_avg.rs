use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{
    activate, argmax, check_training_set, cross_entropy, minibatches, residual_in_place,
    Capabilities, ClassifierKind, EglGroup, TextClassifier, TrainConfig,
};
use crate::corpus::{FeatureSet, LabelMode, LabelSet, LabelSpace};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const EMBEDDING_DIM: usize = 64;
const INIT_SCALE: f64 = 0.5;

/// Mean-pooled token embeddings followed by a linear head.
///
/// `h(x) = (1/T) Σ_t E[tok_t]`, `z = W h(x) + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedAvgLinear {
    pub label_space: LabelSpace,
    pub config: TrainConfig,
    /// `V × d` token-embedding table.
    pub embeddings: Array2<f64>,
    /// `C × d` head weights.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl EmbedAvgLinear {
    pub fn fit(
        features: &FeatureSet,
        rows: &[usize],
        labels: &[LabelSet],
        label_space: &LabelSpace,
        config: &TrainConfig,
    ) -> Result<Self> {
        Ok(Self::fit_traced(features, rows, labels, label_space, config, EMBEDDING_DIM)?.0)
    }

    /// Trains with embedding width `dim` and returns the per-epoch objective.
    pub fn fit_traced(
        features: &FeatureSet,
        rows: &[usize],
        labels: &[LabelSet],
        label_space: &LabelSpace,
        config: &TrainConfig,
        dim: usize,
    ) -> Result<(Self, Vec<f64>)> {
        check_training_set(rows, labels)?;
        config.validate()?;
        for l in labels {
            label_space.validate(l)?;
        }
        let mut model = Self::initialized(features.vocab_size(), label_space, config, dim);
        let target: HashMap<usize, &LabelSet> = rows.iter().copied().zip(labels.iter()).collect();
        let lr = config.learning_rate;
        let shrink = 1.0 / (1.0 + lr * config.l2);
        let classes = label_space.num_classes();
        let mut trace = Vec::with_capacity(config.epochs);

        for epoch in minibatches(rows, config) {
            for batch in epoch {
                let scale = 1.0 / batch.len() as f64;
                let mut grad_w = Array2::<f64>::zeros((classes, dim));
                let mut grad_b = Array1::<f64>::zeros(classes);
                let mut grad_e: HashMap<u32, Array1<f64>> = HashMap::new();
                for &r in &batch {
                    let tokens = features.tokens(r);
                    let h = model.hidden(tokens);
                    let mut p = model.probs_from_hidden(h.view());
                    residual_in_place(&mut p, target[&r]);
                    let res = Array1::from(p);
                    for c in 0..classes {
                        grad_w.row_mut(c).scaled_add(res[c] * scale, &h);
                    }
                    grad_b.scaled_add(scale, &res);
                    if !tokens.is_empty() {
                        let dh = model.weights.t().dot(&res);
                        let per_token = scale / tokens.len() as f64;
                        for &t in tokens {
                            grad_e
                                .entry(t)
                                .or_insert_with(|| Array1::zeros(dim))
                                .scaled_add(per_token, &dh);
                        }
                    }
                }
                model.weights.scaled_add(-lr, &grad_w);
                model.weights.mapv_inplace(|w| w * shrink);
                model.bias.scaled_add(-lr, &grad_b);
                for (t, g) in grad_e {
                    model.embeddings.row_mut(t as usize).scaled_add(-lr, &g);
                }
            }
            trace.push(model.objective(features, rows, labels));
        }
        Ok((model, trace))
    }

    fn initialized(vocab: usize, label_space: &LabelSpace, config: &TrainConfig, dim: usize) -> Self {
        let mut rng = Rng::new(config.seed ^ 0x5EED_E4BE_DD00_0001);
        let classes = label_space.num_classes();
        let embeddings =
            Array2::from_shape_fn((vocab, dim), |_| rng.uniform(-INIT_SCALE, INIT_SCALE));
        let bound = 1.0 / (dim as f64).sqrt();
        let weights = Array2::from_shape_fn((classes, dim), |_| rng.uniform(-bound, bound));
        Self {
            label_space: label_space.clone(),
            config: config.clone(),
            embeddings,
            weights,
            bias: Array1::zeros(classes),
        }
    }

    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    /// Mean of the embedding rows of `tokens`; zero for an empty document.
    pub fn hidden(&self, tokens: &[u32]) -> Array1<f64> {
        let mut h = Array1::zeros(self.dim());
        if tokens.is_empty() {
            return h;
        }
        for &t in tokens {
            h += &self.embeddings.row(t as usize);
        }
        h / tokens.len() as f64
    }

    fn probs_from_hidden(&self, h: ArrayView1<f64>) -> Vec<f64> {
        let mut z = (self.weights.dot(&h) + &self.bias).to_vec();
        activate(&mut z, self.label_space.mode);
        z
    }

    /// Mean cross-entropy over `rows` plus `λ‖W‖²/2`.
    pub fn objective(&self, features: &FeatureSet, rows: &[usize], labels: &[LabelSet]) -> f64 {
        let data: f64 = rows
            .iter()
            .zip(labels)
            .map(|(&r, l)| {
                let p = self.probs_from_hidden(self.hidden(features.tokens(r)).view());
                cross_entropy(&p, l, self.label_space.mode)
            })
            .sum::<f64>()
            / rows.len() as f64;
        data + 0.5 * self.config.l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    fn check_width(&self, features: &FeatureSet) -> Result<()> {
        if features.vocab_size() != self.embeddings.nrows() {
            return Err(Error::WidthMismatch {
                expected: self.embeddings.nrows(),
                actual: features.vocab_size(),
            });
        }
        Ok(())
    }

    fn require_single_label(&self) -> Result<()> {
        if self.label_space.mode == LabelMode::MultiLabel {
            return Err(Error::SingleLabelOnly);
        }
        Ok(())
    }
}

impl TextClassifier for EmbedAvgLinear {
    fn capabilities(&self) -> Capabilities {
        ClassifierKind::EmbedAvgLinear.capabilities(self.label_space.mode)
    }

    fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    fn predict_proba(&self, features: &FeatureSet, rows: &[usize]) -> Result<Array2<f64>> {
        self.check_width(features)?;
        let mut out = Array2::zeros((rows.len(), self.label_space.num_classes()));
        for (i, &r) in rows.iter().enumerate() {
            let p = self.probs_from_hidden(self.hidden(features.tokens(r)).view());
            out.row_mut(i).assign(&Array1::from(p));
        }
        Ok(out)
    }

    fn embed(&self, features: &FeatureSet, rows: &[usize]) -> Result<Array2<f64>> {
        self.check_width(features)?;
        let mut out = Array2::zeros((rows.len(), self.dim()));
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).assign(&self.hidden(features.tokens(r)));
        }
        Ok(out)
    }

    fn gradient_embedding(&self, features: &FeatureSet, rows: &[usize]) -> Result<Array2<f64>> {
        self.require_single_label()?;
        self.check_width(features)?;
        let d = self.dim();
        let classes = self.label_space.num_classes();
        let mut out = Array2::zeros((rows.len(), classes * d));
        for (i, &r) in rows.iter().enumerate() {
            let h = self.hidden(features.tokens(r));
            let mut p = self.probs_from_hidden(h.view());
            let predicted = argmax(&p);
            p[predicted] -= 1.0;
            for (c, &res) in p.iter().enumerate() {
                for j in 0..d {
                    out[[i, c * d + j]] = res * h[j];
                }
            }
        }
        Ok(out)
    }

    /// Gradient norms are taken per parameter. A token occurring `m` times in
    /// a document of length `T` receives `(m/T)·Wᵀ(p − e_c)` on its embedding
    /// row, which reduces to `(1/T)·Wᵀ(p − e_c)` when all tokens are distinct.
    fn egl_gradient_norms(
        &self,
        features: &FeatureSet,
        rows: &[usize],
        group: EglGroup,
    ) -> Result<Array2<f64>> {
        self.require_single_label()?;
        self.check_width(features)?;
        let classes = self.label_space.num_classes();
        let mut out = Array2::zeros((rows.len(), classes));
        for (i, &r) in rows.iter().enumerate() {
            let tokens = features.tokens(r);
            let h = self.hidden(tokens);
            let p = Array1::from(self.probs_from_hidden(h.view()));
            let h_sq = h.dot(&h);
            let total = tokens.len() as f64;
            let mut counts: HashMap<u32, f64> = HashMap::new();
            for &t in tokens {
                *counts.entry(t).or_insert(0.0) += 1.0;
            }
            let max_count = counts.values().copied().fold(0.0, f64::max);
            let count_norm = counts.values().map(|m| m * m).sum::<f64>().sqrt();
            for c in 0..classes {
                let mut res = p.clone();
                res[c] -= 1.0;
                let softmax = res.dot(&res).sqrt() * (h_sq + 1.0).sqrt();
                let back = self.weights.t().dot(&res);
                let back_norm = back.dot(&back).sqrt();
                let (word_max, word_total) = if tokens.is_empty() {
                    (0.0, 0.0)
                } else {
                    (max_count / total * back_norm, count_norm / total * back_norm)
                };
                out[[i, c]] = match group {
                    EglGroup::Softmax => softmax,
                    EglGroup::Word => word_max,
                    EglGroup::Full => (softmax * softmax + word_total * word_total).sqrt(),
                };
            }
        }
        Ok(out)
    }
}
