//! Query strategies behind one selection contract.
//!
//! Every strategy maps a [`QueryRequest`] to a [`QueryResult`] holding `k`
//! distinct candidate indices. Scores follow one convention throughout:
//! larger means more informative, and ties go to the smaller dataset index.
//!
//! Strategy identifiers used in configuration files and on the command line:
//!
//! | id | family |
//! |----|--------|
//! | `random` | baseline |
//! | `least_confidence`, `prediction_entropy`, `breaking_ties`, `cal` | confidence |
//! | `badge`, `kmeans`, `dal`, `seals` | embedding |
//! | `egl`, `egl_word`, `egl_sm` | gradient |
//! | `greedy_coreset`, `lightweight_coreset` | coreset |
//!
//! Parameters are appended as `:key=value`, e.g. `cal:neighbors=5` or
//! `badge:subsample=5000`.

mod cal;
mod confidence;
mod coreset;
mod dal;
mod egl;
mod kmeans;
mod seals;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

pub use cal::{kl_divergence, query_cal};
pub use confidence::{query_confidence, uncertainty_scores, UncertaintyMode};
pub use coreset::{greedy_coreset, lightweight_coreset, lightweight_distribution};
pub use dal::query_dal;
pub use egl::query_egl;
pub use kmeans::{kmeans_pp_seeding, query_badge, query_embedding_kmeans};
pub use seals::seals_restrict;

use crate::classification::{Capabilities, EglGroup, TextClassifier, TrainConfig};
use crate::corpus::FeatureSet;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_CAL_NEIGHBORS: usize = 10;
pub const DEFAULT_SEALS_NEIGHBORS: usize = 10;
pub const DEFAULT_DAL_SUB_ITERATIONS: usize = 3;
pub const DEFAULT_KMEANS_ITERATIONS: usize = 20;
pub const DEFAULT_SUBSAMPLE: usize = 20_000;

/// Everything a strategy may look at when selecting a batch.
pub struct QueryRequest<'a> {
    pub classifier: &'a dyn TextClassifier,
    pub features: &'a FeatureSet,
    pub labeled: &'a [usize],
    /// Unlabeled candidate indices in ascending order.
    pub candidates: Vec<usize>,
    pub k: usize,
    pub rng: &'a mut Rng,
    /// SGD settings for strategies that train auxiliary models.
    pub train: TrainConfig,
}

impl<'a> QueryRequest<'a> {
    pub fn new(
        classifier: &'a dyn TextClassifier,
        features: &'a FeatureSet,
        labeled: &'a [usize],
        candidates: impl IntoIterator<Item = usize>,
        k: usize,
        rng: &'a mut Rng,
    ) -> Self {
        let mut candidates: Vec<usize> = candidates.into_iter().collect();
        candidates.sort_unstable();
        candidates.dedup();
        Self {
            classifier,
            features,
            labeled,
            candidates,
            k,
            rng,
            train: TrainConfig::default(),
        }
    }

    pub fn with_train_config(mut self, train: TrainConfig) -> Self {
        self.train = train;
        self
    }

    fn check_batch(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("batch size must be ≥ 1".into()));
        }
        if self.k > self.candidates.len() {
            return Err(Error::BatchTooLarge {
                k: self.k,
                available: self.candidates.len(),
            });
        }
        Ok(())
    }

    fn require_labeled(&self) -> Result<()> {
        if self.labeled.is_empty() {
            return Err(Error::NoLabeled);
        }
        Ok(())
    }

    /// Same request restricted to `candidates`, sharing the RNG stream.
    fn restricted(&mut self, candidates: Vec<usize>) -> QueryRequest<'_> {
        QueryRequest {
            classifier: self.classifier,
            features: self.features,
            labeled: self.labeled,
            candidates,
            k: self.k,
            rng: &mut *self.rng,
            train: self.train.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    /// `k` distinct candidate indices in selection order.
    pub selected: Vec<usize>,
    /// Informativeness per candidate (aligned with the request's candidates)
    /// for score-based strategies.
    pub scores: Option<Vec<f64>>,
}

/// Strategy identifier with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategyKind {
    Random,
    LeastConfidence,
    PredictionEntropy,
    BreakingTies,
    Cal { neighbors: usize },
    Badge,
    Kmeans { iterations: usize },
    Dal { sub_iterations: usize },
    Seals { neighbors: usize, base: Box<StrategyKind> },
    Egl,
    EglWord,
    EglSm,
    GreedyCoreset,
    LightweightCoreset,
}

impl StrategyKind {
    pub const IDS: [&'static str; 14] = [
        "random",
        "least_confidence",
        "prediction_entropy",
        "breaking_ties",
        "cal",
        "badge",
        "kmeans",
        "dal",
        "seals",
        "egl",
        "egl_word",
        "egl_sm",
        "greedy_coreset",
        "lightweight_coreset",
    ];

    /// Kind with default parameters.
    pub fn from_id(id: &str) -> Result<Self> {
        Ok(match id {
            "random" => StrategyKind::Random,
            "least_confidence" => StrategyKind::LeastConfidence,
            "prediction_entropy" => StrategyKind::PredictionEntropy,
            "breaking_ties" => StrategyKind::BreakingTies,
            "cal" => StrategyKind::Cal {
                neighbors: DEFAULT_CAL_NEIGHBORS,
            },
            "badge" => StrategyKind::Badge,
            "kmeans" => StrategyKind::Kmeans {
                iterations: DEFAULT_KMEANS_ITERATIONS,
            },
            "dal" => StrategyKind::Dal {
                sub_iterations: DEFAULT_DAL_SUB_ITERATIONS,
            },
            "seals" => StrategyKind::Seals {
                neighbors: DEFAULT_SEALS_NEIGHBORS,
                base: Box::new(StrategyKind::BreakingTies),
            },
            "egl" => StrategyKind::Egl,
            "egl_word" => StrategyKind::EglWord,
            "egl_sm" => StrategyKind::EglSm,
            "greedy_coreset" => StrategyKind::GreedyCoreset,
            "lightweight_coreset" => StrategyKind::LightweightCoreset,
            other => {
                return Err(Error::InvalidParameter(format!("unknown strategy `{other}`")))
            }
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::LeastConfidence => "least_confidence",
            StrategyKind::PredictionEntropy => "prediction_entropy",
            StrategyKind::BreakingTies => "breaking_ties",
            StrategyKind::Cal { .. } => "cal",
            StrategyKind::Badge => "badge",
            StrategyKind::Kmeans { .. } => "kmeans",
            StrategyKind::Dal { .. } => "dal",
            StrategyKind::Seals { .. } => "seals",
            StrategyKind::Egl => "egl",
            StrategyKind::EglWord => "egl_word",
            StrategyKind::EglSm => "egl_sm",
            StrategyKind::GreedyCoreset => "greedy_coreset",
            StrategyKind::LightweightCoreset => "lightweight_coreset",
        }
    }

    pub fn required_capabilities(&self) -> Capabilities {
        let mut caps = Capabilities::NONE;
        match self {
            StrategyKind::Random => {}
            StrategyKind::LeastConfidence
            | StrategyKind::PredictionEntropy
            | StrategyKind::BreakingTies => caps.probabilities = true,
            StrategyKind::Cal { .. } => {
                caps.probabilities = true;
                caps.embeddings = true;
            }
            StrategyKind::Badge => caps.gradient_embeddings = true,
            StrategyKind::Kmeans { .. }
            | StrategyKind::Dal { .. }
            | StrategyKind::GreedyCoreset
            | StrategyKind::LightweightCoreset => caps.embeddings = true,
            StrategyKind::Seals { base, .. } => {
                caps = base.required_capabilities();
                caps.embeddings = true;
            }
            StrategyKind::Egl | StrategyKind::EglWord | StrategyKind::EglSm => {
                caps.probabilities = true;
                caps.per_group_gradients = true;
            }
        }
        caps
    }

    pub fn supports_multi_label(&self) -> bool {
        matches!(
            self,
            StrategyKind::Random
                | StrategyKind::LeastConfidence
                | StrategyKind::PredictionEntropy
                | StrategyKind::BreakingTies
        )
    }

    fn params(&self) -> Vec<(&'static str, String)> {
        match self {
            StrategyKind::Cal { neighbors } => vec![("neighbors", neighbors.to_string())],
            StrategyKind::Kmeans { iterations } => vec![("iterations", iterations.to_string())],
            StrategyKind::Dal { sub_iterations } => {
                vec![("sub_iterations", sub_iterations.to_string())]
            }
            StrategyKind::Seals { neighbors, base } => vec![
                ("neighbors", neighbors.to_string()),
                ("base", base.id().to_string()),
            ],
            _ => Vec::new(),
        }
    }
}

/// A strategy plus the optional candidate-subsampling modifier.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub subsample: Option<usize>,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            subsample: None,
        }
    }

    pub fn id(&self) -> &'static str {
        self.kind.id()
    }

    pub fn required_capabilities(&self) -> Capabilities {
        self.kind.required_capabilities()
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.id())?;
        for (k, v) in self.kind.params() {
            write!(f, ":{k}={v}")?;
        }
        if let Some(m) = self.subsample {
            write!(f, ":subsample={m}")?;
        }
        Ok(())
    }
}

impl FromStr for StrategyConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let id = parts.next().unwrap_or_default().trim();
        let mut kind = StrategyKind::from_id(id)?;
        let mut subsample = None;
        for part in parts {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("expected key=value, got `{part}`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let number = || {
                value.parse::<usize>().map_err(|_| {
                    Error::InvalidParameter(format!("`{key}` expects an integer, got `{value}`"))
                })
            };
            match (&mut kind, key) {
                (_, "subsample") => subsample = Some(number()?),
                (StrategyKind::Cal { neighbors }, "neighbors")
                | (StrategyKind::Seals { neighbors, .. }, "neighbors") => *neighbors = number()?,
                (StrategyKind::Kmeans { iterations }, "iterations") => *iterations = number()?,
                (StrategyKind::Dal { sub_iterations }, "sub_iterations") => {
                    *sub_iterations = number()?
                }
                (StrategyKind::Seals { base, .. }, "base") => {
                    let b = StrategyKind::from_id(value)?;
                    if matches!(b, StrategyKind::Seals { .. }) {
                        return Err(Error::InvalidParameter("seals cannot wrap itself".into()));
                    }
                    *base = Box::new(b);
                }
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "strategy `{id}` has no parameter `{key}`"
                    )))
                }
            }
        }
        match &kind {
            StrategyKind::Cal { neighbors: 0 } | StrategyKind::Seals { neighbors: 0, .. } => {
                return Err(Error::InvalidParameter("neighbors must be ≥ 1".into()))
            }
            StrategyKind::Dal { sub_iterations: 0 } => {
                return Err(Error::InvalidParameter("sub_iterations must be ≥ 1".into()))
            }
            _ => {}
        }
        if subsample == Some(0) {
            return Err(Error::InvalidParameter("subsample must be ≥ 1".into()));
        }
        Ok(Self { kind, subsample })
    }
}

impl Serialize for StrategyConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StrategyConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Runs the configured strategy, applying the subsampling modifier first.
pub fn query(config: &StrategyConfig, req: &mut QueryRequest<'_>) -> Result<QueryResult> {
    match config.subsample {
        Some(m) => {
            let candidates = subsample_candidates(req, m)?;
            let mut inner = req.restricted(candidates);
            query_kind(&config.kind, &mut inner)
        }
        None => query_kind(&config.kind, req),
    }
}

/// Replaces the candidate set with a seeded uniform sample of
/// `min(m, |candidates|)` indices (ascending).
pub fn subsample_candidates(req: &mut QueryRequest<'_>, m: usize) -> Result<Vec<usize>> {
    if m < req.k {
        return Err(Error::InvalidParameter(format!(
            "subsample size {m} is smaller than batch size {}",
            req.k
        )));
    }
    if m >= req.candidates.len() {
        return Ok(req.candidates.clone());
    }
    let mut sample = req.rng.sample(&req.candidates, m);
    sample.sort_unstable();
    Ok(sample)
}

pub fn query_kind(kind: &StrategyKind, req: &mut QueryRequest<'_>) -> Result<QueryResult> {
    req.check_batch()?;
    if req.classifier.label_space().is_multi_label() && !kind.supports_multi_label() {
        return Err(Error::MultiLabelUnsupported(kind.id().to_string()));
    }
    let missing = req
        .classifier
        .capabilities()
        .missing(&kind.required_capabilities());
    if let Some(&name) = missing.first() {
        return Err(Error::MissingCapability(name));
    }
    match kind {
        StrategyKind::Random => query_random(req),
        StrategyKind::LeastConfidence => query_confidence(req, UncertaintyMode::LeastConfidence),
        StrategyKind::PredictionEntropy => query_confidence(req, UncertaintyMode::Entropy),
        StrategyKind::BreakingTies => query_confidence(req, UncertaintyMode::Margin),
        StrategyKind::Cal { neighbors } => query_cal(req, *neighbors),
        StrategyKind::Badge => query_badge(req),
        StrategyKind::Kmeans { iterations } => query_embedding_kmeans(req, *iterations),
        StrategyKind::Dal { sub_iterations } => query_dal(req, *sub_iterations),
        StrategyKind::Seals { neighbors, base } => {
            let candidates = seals_restrict(req, *neighbors)?;
            let mut inner = req.restricted(candidates);
            query_kind(base, &mut inner)
        }
        StrategyKind::Egl => query_egl(req, EglGroup::Full),
        StrategyKind::EglWord => query_egl(req, EglGroup::Word),
        StrategyKind::EglSm => query_egl(req, EglGroup::Softmax),
        StrategyKind::GreedyCoreset => {
            req.require_labeled()?;
            let labeled = req.classifier.embed(req.features, req.labeled)?;
            let unlabeled = req.classifier.embed(req.features, &req.candidates)?;
            let positions = greedy_coreset(&labeled, &unlabeled, req.k)?;
            Ok(map_positions(&req.candidates, positions, None))
        }
        StrategyKind::LightweightCoreset => {
            let x = req.classifier.embed(req.features, &req.candidates)?;
            let positions = lightweight_coreset(&x, req.k, req.rng)?;
            Ok(map_positions(&req.candidates, positions, None))
        }
    }
}

pub fn query_random(req: &mut QueryRequest<'_>) -> Result<QueryResult> {
    req.check_batch()?;
    Ok(QueryResult {
        selected: req.rng.sample(&req.candidates, req.k),
        scores: None,
    })
}

pub(crate) fn map_positions(
    candidates: &[usize],
    positions: Vec<usize>,
    scores: Option<Vec<f64>>,
) -> QueryResult {
    QueryResult {
        selected: positions.into_iter().map(|p| candidates[p]).collect(),
        scores,
    }
}

/// Orders by score descending, then by candidate index ascending. NaN
/// scores rank last.
fn score_order(a: (f64, usize), b: (f64, usize)) -> Ordering {
    let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
    key(b.0)
        .total_cmp(&key(a.0))
        .then_with(|| a.1.cmp(&b.1))
}

/// Positions of the `k` best scores with the smallest-index tie-break.
pub fn top_k(candidates: &[usize], scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| score_order((scores[i], candidates[i]), (scores[j], candidates[j])));
    order.truncate(k);
    order
}

pub(crate) fn top_k_result(candidates: &[usize], scores: Vec<f64>, k: usize) -> QueryResult {
    let positions = top_k(candidates, &scores, k);
    map_positions(candidates, positions, Some(scores))
}

pub(crate) fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pairwise squared Euclidean distances between rows of `a` and rows of `b`.
pub(crate) fn pairwise_squared(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        squared_distance(a.row(i), b.row(j))
    })
}
