//! Classifier contract and the built-in text classifiers.
//!
//! Two models are provided:
//!
//! - [`SparseLinear`]: softmax (single-label) or per-class sigmoid
//!   (multi-label) regression on TF-IDF rows. Its embedding is a fixed,
//!   seeded random projection of the TF-IDF row.
//! - [`EmbedAvgLinear`]: a trainable token-embedding table, mean-pooled into
//!   a hidden vector `h(x)`, followed by a linear head. It is the model that
//!   exposes last-layer gradient embeddings and per-parameter-group gradient
//!   norms.
//!
//! Both are trained from scratch by seeded minibatch SGD on cross-entropy
//! plus `λ‖W‖²/2` on the head weights `W`. The L2 term is applied as a
//! proximal step, `W ← (W − η·g) / (1 + η·λ)`, which stays stable for any
//! `λ`.

mod dense;
mod embed_avg;
mod fixed;
mod sparse_linear;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

pub use dense::DenseSoftmax;
pub use embed_avg::EmbedAvgLinear;
pub use fixed::FixedClassifier;
pub use sparse_linear::SparseLinear;

use crate::corpus::{FeatureSet, LabelMode, LabelSet, LabelSpace};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Optional abilities of a trained classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Capabilities {
    pub probabilities: bool,
    pub embeddings: bool,
    pub gradient_embeddings: bool,
    pub per_group_gradients: bool,
}

impl Capabilities {
    pub const NONE: Capabilities = Capabilities {
        probabilities: false,
        embeddings: false,
        gradient_embeddings: false,
        per_group_gradients: false,
    };

    /// Names of the flags set in `required` but missing here.
    pub fn missing(&self, required: &Capabilities) -> Vec<&'static str> {
        let mut out = Vec::new();
        if required.probabilities && !self.probabilities {
            out.push("probabilities");
        }
        if required.embeddings && !self.embeddings {
            out.push("embeddings");
        }
        if required.gradient_embeddings && !self.gradient_embeddings {
            out.push("gradient_embeddings");
        }
        if required.per_group_gradients && !self.per_group_gradients {
            out.push("per_group_gradients");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 20,
            batch_size: 32,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidParameter("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

/// Parameter group whose loss-gradient norm EGL variants measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EglGroup {
    /// Output layer: head weights and bias.
    Softmax,
    /// Token-embedding rows; the largest row norm.
    Word,
    /// Output layer and all token-embedding rows together.
    Full,
}

/// Uniform classifier contract consumed by strategies and the learner.
///
/// `rows` always index into the [`FeatureSet`]; returned matrices have one
/// row per requested index in the same order.
pub trait TextClassifier: Send + Sync {
    fn capabilities(&self) -> Capabilities;

    fn label_space(&self) -> &LabelSpace;

    fn predict_proba(&self, features: &FeatureSet, rows: &[usize]) -> Result<Array2<f64>>;

    fn embed(&self, _features: &FeatureSet, _rows: &[usize]) -> Result<Array2<f64>> {
        Err(Error::MissingCapability("embeddings"))
    }

    /// `flatten((p − e_ŷ) · h(x)ᵀ)` with `ŷ = argmax p`, one row per document.
    fn gradient_embedding(&self, _features: &FeatureSet, _rows: &[usize]) -> Result<Array2<f64>> {
        Err(Error::MissingCapability("gradient_embeddings"))
    }

    /// `n × C` matrix of `‖∇L(x, c)‖` restricted to `group`, one column per
    /// hypothetical label `c`.
    fn egl_gradient_norms(
        &self,
        _features: &FeatureSet,
        _rows: &[usize],
        _group: EglGroup,
    ) -> Result<Array2<f64>> {
        Err(Error::MissingCapability("per_group_gradients"))
    }

    fn predict(&self, features: &FeatureSet, rows: &[usize]) -> Result<Vec<LabelSet>> {
        let probs = self.predict_proba(features, rows)?;
        let multi = self.label_space().is_multi_label();
        Ok(probs
            .rows()
            .into_iter()
            .map(|p| decide(p, multi))
            .collect())
    }
}

/// Predicted label set from one probability row: argmax (ties to the lower
/// class) or, for multi-label, every class with `p ≥ 0.5`.
pub fn decide(p: ArrayView1<f64>, multi_label: bool) -> LabelSet {
    if multi_label {
        LabelSet::new(
            p.iter()
                .enumerate()
                .filter(|(_, &v)| v >= 0.5)
                .map(|(c, _)| c)
                .collect(),
        )
    } else {
        LabelSet::single(argmax(p.as_slice().unwrap_or(&p.to_vec())))
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable in-place softmax.
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Converts logits to probabilities for the given mode.
pub(crate) fn activate(z: &mut [f64], mode: LabelMode) {
    match mode {
        LabelMode::SingleLabel => softmax_in_place(z),
        LabelMode::MultiLabel => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
    }
}

/// `∂L/∂z = p − y` for both softmax cross-entropy and per-class binary
/// cross-entropy, written into `p`.
pub(crate) fn residual_in_place(p: &mut [f64], target: &LabelSet) {
    for &c in target.classes() {
        p[c] -= 1.0;
    }
}

/// Per-example cross-entropy of probabilities `p` against `target`.
pub fn cross_entropy(p: &[f64], target: &LabelSet, mode: LabelMode) -> f64 {
    const FLOOR: f64 = 1e-300;
    match mode {
        LabelMode::SingleLabel => -p[target.primary().unwrap_or(0)].max(FLOOR).ln(),
        LabelMode::MultiLabel => p
            .iter()
            .enumerate()
            .map(|(c, &pc)| {
                if target.contains(c) {
                    -pc.max(FLOOR).ln()
                } else {
                    -(1.0 - pc).max(FLOOR).ln()
                }
            })
            .sum(),
    }
}

/// Seeded minibatch schedule shared by the trainers. Rows are sorted first so
/// training depends on the labeled set, not on the order it was assembled.
pub(crate) fn minibatches(rows: &[usize], config: &TrainConfig) -> Vec<Vec<Vec<usize>>> {
    let mut rng = Rng::new(config.seed);
    let mut order: Vec<usize> = rows.to_vec();
    order.sort_unstable();
    (0..config.epochs)
        .map(|_| {
            rng.shuffle(&mut order);
            balanced_chunks(&order, config.batch_size)
        })
        .collect()
}

/// Splits `items` into `⌈n/size⌉` consecutive chunks whose sizes differ by at
/// most one, so no epoch ends on a near-empty batch.
fn balanced_chunks(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    let count = n.div_ceil(size);
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    for b in 0..count {
        let len = n / count + usize::from(b < n % count);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Identifier of a built-in classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    SparseLinear,
    EmbedAvgLinear,
}

impl ClassifierKind {
    pub fn id(&self) -> &'static str {
        match self {
            ClassifierKind::SparseLinear => "sparse_linear",
            ClassifierKind::EmbedAvgLinear => "embed_avg_linear",
        }
    }

    /// Capabilities of a model of this kind trained for `mode`.
    pub fn capabilities(&self, mode: LabelMode) -> Capabilities {
        match self {
            ClassifierKind::SparseLinear => Capabilities {
                probabilities: true,
                embeddings: true,
                gradient_embeddings: false,
                per_group_gradients: false,
            },
            ClassifierKind::EmbedAvgLinear => {
                let single = mode == LabelMode::SingleLabel;
                Capabilities {
                    probabilities: true,
                    embeddings: true,
                    gradient_embeddings: single,
                    per_group_gradients: single,
                }
            }
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse_linear" => Ok(ClassifierKind::SparseLinear),
            "embed_avg_linear" | "embed_avg" => Ok(ClassifierKind::EmbedAvgLinear),
            other => Err(Error::InvalidParameter(format!("unknown classifier `{other}`"))),
        }
    }
}

/// A trained built-in classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    SparseLinear(SparseLinear),
    EmbedAvgLinear(EmbedAvgLinear),
}

impl Model {
    /// Trains a fresh model of `kind` on `rows` with their `labels`.
    pub fn fit(
        kind: ClassifierKind,
        features: &FeatureSet,
        rows: &[usize],
        labels: &[LabelSet],
        label_space: &LabelSpace,
        config: &TrainConfig,
    ) -> Result<Model> {
        Ok(match kind {
            ClassifierKind::SparseLinear => {
                Model::SparseLinear(SparseLinear::fit(features, rows, labels, label_space, config)?)
            }
            ClassifierKind::EmbedAvgLinear => Model::EmbedAvgLinear(EmbedAvgLinear::fit(
                features,
                rows,
                labels,
                label_space,
                config,
            )?),
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Model::SparseLinear(_) => ClassifierKind::SparseLinear,
            Model::EmbedAvgLinear(_) => ClassifierKind::EmbedAvgLinear,
        }
    }

    fn inner(&self) -> &dyn TextClassifier {
        match self {
            Model::SparseLinear(m) => m,
            Model::EmbedAvgLinear(m) => m,
        }
    }

    pub fn config(&self) -> &TrainConfig {
        match self {
            Model::SparseLinear(m) => &m.config,
            Model::EmbedAvgLinear(m) => &m.config,
        }
    }
}

impl TextClassifier for Model {
    fn capabilities(&self) -> Capabilities {
        self.inner().capabilities()
    }

    fn label_space(&self) -> &LabelSpace {
        self.inner().label_space()
    }

    fn predict_proba(&self, features: &FeatureSet, rows: &[usize]) -> Result<Array2<f64>> {
        self.inner().predict_proba(features, rows)
    }

    fn embed(&self, features: &FeatureSet, rows: &[usize]) -> Result<Array2<f64>> {
        self.inner().embed(features, rows)
    }

    fn gradient_embedding(&self, features: &FeatureSet, rows: &[usize]) -> Result<Array2<f64>> {
        self.inner().gradient_embedding(features, rows)
    }

    fn egl_gradient_norms(
        &self,
        features: &FeatureSet,
        rows: &[usize],
        group: EglGroup,
    ) -> Result<Array2<f64>> {
        self.inner().egl_gradient_norms(features, rows, group)
    }
}

/// On-disk model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub label_space: LabelSpace,
    pub vocabulary_hash: String,
    pub config: TrainConfig,
    pub seed: u64,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(model: Model, features: &FeatureSet) -> Self {
        Self {
            label_space: model.label_space().clone(),
            vocabulary_hash: features.vocabulary().hash(),
            config: model.config().clone(),
            seed: model.config().seed,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)?;
        crate::learner::write_atomic(path, &bytes)
    }

    /// Loads a checkpoint and checks it was trained on `features`' vocabulary.
    pub fn load(path: &Path, features: &FeatureSet) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes)?;
        if ckpt.vocabulary_hash != features.vocabulary().hash() {
            return Err(Error::CorruptSession {
                field: "vocabulary_hash".into(),
                message: "checkpoint was trained on a different vocabulary".into(),
            });
        }
        Ok(ckpt)
    }
}

pub(crate) fn check_training_set(rows: &[usize], labels: &[LabelSet]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch(rows.len(), labels.len()));
    }
    Ok(())
}
