//! The pool-based active learning loop.
//!
//! An [`ActiveLearner`] alternates between two phases:
//!
//! ```text
//! AwaitingQuery --query()--> AwaitingLabels --update(labels)--> AwaitingQuery
//! ```
//!
//! `update` moves the pending batch into the labeled pool, retrains the model
//! from scratch on everything labeled so far, predicts the fixed stop set and
//! appends a [`RoundRecord`]. Sessions persist to a directory:
//!
//! ```text
//! <dir>/manifest.json   config, phase, round, pending batch, stop-set state
//! <dir>/pools.json      labeled / unlabeled indices and acquired labels
//! <dir>/history.jsonl   one RoundRecord per line
//! <dir>/model.json      model checkpoint
//! <dir>/rng.json        generator state
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classification::{Checkpoint, ClassifierKind, Model, TextClassifier, TrainConfig};
use crate::corpus::{Dataset, FeatureSet, LabelSet, PoolState};
use crate::error::{Error, Result};
use crate::metrics::Metrics;
use crate::rng::Rng;
use crate::stopping::{
    change_decision, change_rate, kappa_average_should_stop, kappa_for, observe_change_rate,
    ChangeState, StopDecision, StoppingConfig,
};
use crate::strategies::{self, QueryRequest, StrategyConfig};

pub const DEFAULT_STOP_SET_SIZE: usize = 1000;
pub const DEFAULT_MAX_ROUNDS: usize = 100;
const FORMAT_VERSION: u32 = 1;

fn default_stop_set_size() -> usize {
    DEFAULT_STOP_SET_SIZE
}

fn default_max_rounds() -> usize {
    DEFAULT_MAX_ROUNDS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub classifier: ClassifierKind,
    #[serde(default)]
    pub train: TrainConfig,
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub stopping: Vec<StoppingConfig>,
    pub batch_size: usize,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stop_set_size")]
    pub stop_set_size: usize,
}

impl LoopConfig {
    pub fn new(classifier: ClassifierKind, strategy: StrategyConfig, batch_size: usize) -> Self {
        Self {
            classifier,
            train: TrainConfig::default(),
            strategy,
            stopping: Vec::new(),
            batch_size,
            max_rounds: DEFAULT_MAX_ROUNDS,
            seed: 0,
            stop_set_size: DEFAULT_STOP_SET_SIZE,
        }
    }

    /// Checks parameters and classifier/strategy compatibility for `dataset`.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be ≥ 1".into()));
        }
        if self.stop_set_size == 0 {
            return Err(Error::InvalidParameter("stop_set_size must be ≥ 1".into()));
        }
        self.train.validate()?;
        let mode = dataset.label_space().mode;
        if dataset.label_space().is_multi_label() && !self.strategy.kind.supports_multi_label() {
            return Err(Error::MultiLabelUnsupported(self.strategy.id().to_string()));
        }
        let have = self.classifier.capabilities(mode);
        if let Some(&missing) = have.missing(&self.strategy.required_capabilities()).first() {
            return Err(Error::MissingCapability(missing));
        }
        if let Some(m) = self.strategy.subsample {
            if m < self.batch_size {
                return Err(Error::InvalidParameter(format!(
                    "subsample size {m} is smaller than batch size {}",
                    self.batch_size
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingQuery,
    AwaitingLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub queried: Vec<usize>,
    pub labels: Vec<LabelSet>,
    pub labeled_count: usize,
    pub stop_predictions_digest: String,
    pub kappa: Option<f64>,
    pub change_rate: Option<f64>,
    pub stopping: Vec<StopDecision>,
    pub metrics: Option<Metrics>,
    /// Retrain wall-clock time in milliseconds; excluded from digests.
    pub wall_clock_ms: f64,
}

/// Digest of a history with wall-clock times zeroed.
pub fn history_digest(history: &[RoundRecord]) -> String {
    let mut buf = Vec::new();
    for r in history {
        let mut r = r.clone();
        r.wall_clock_ms = 0.0;
        serde_json::to_writer(&mut buf, &r).expect("round record serializes");
        buf.push(b'\n');
    }
    crate::sha256_hex(&buf)
}

fn predictions_digest(preds: &[LabelSet]) -> String {
    crate::sha256_hex(&serde_json::to_vec(preds).expect("label sets serialize"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoppingState {
    kappa_history: Vec<f64>,
    change_states: Vec<ChangeState>,
    stop_predictions: Vec<LabelSet>,
    prev_stop_predictions: Option<Vec<LabelSet>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PoolsFile {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    labels: Vec<(usize, LabelSet)>,
}

pub struct ActiveLearner {
    dataset: Arc<Dataset>,
    features: Arc<FeatureSet>,
    config: LoopConfig,
    pools: PoolState,
    labels: BTreeMap<usize, LabelSet>,
    model: Model,
    history: Vec<RoundRecord>,
    rng: Rng,
    phase: Phase,
    pending: Vec<usize>,
    stop_set: Vec<usize>,
    stopping: StoppingState,
}

impl std::fmt::Debug for ActiveLearner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ActiveLearner")
            .field("phase", &self.phase)
            .field("round", &self.round())
            .field("labeled", &self.pools.labeled().len())
            .field("unlabeled", &self.pools.unlabeled().len())
            .finish()
    }
}

impl ActiveLearner {
    /// Starts a loop over `pool` (all documents when `None`): labels the seed
    /// set, trains the first model and records round 0.
    pub fn initialize(
        dataset: Arc<Dataset>,
        features: Arc<FeatureSet>,
        pool: Option<Vec<usize>>,
        seed_indices: &[usize],
        seed_labels: &[LabelSet],
        config: LoopConfig,
    ) -> Result<Self> {
        config.validate(&dataset)?;
        if features.len() != dataset.len() {
            return Err(Error::LengthMismatch(features.len(), dataset.len()));
        }
        if seed_indices.is_empty() {
            return Err(Error::EmptySeedSet);
        }
        if seed_indices.len() != seed_labels.len() {
            return Err(Error::LengthMismatch(seed_indices.len(), seed_labels.len()));
        }
        let pool = pool.unwrap_or_else(|| (0..dataset.len()).collect());
        if let Some(&bad) = pool.iter().find(|&&i| i >= dataset.len()) {
            return Err(Error::IndexOutOfRange(bad));
        }
        let mut pools = PoolState::all_unlabeled(pool.iter().copied());
        let mut labels = BTreeMap::new();
        for (&i, l) in seed_indices.iter().zip(seed_labels) {
            dataset.label_space().validate(l)?;
            pools.transfer(i)?;
            labels.insert(i, l.clone());
        }

        let mut rng = Rng::new(config.seed);
        let mut stop_set = rng.sample(&pool, config.stop_set_size.min(pool.len()));
        stop_set.sort_unstable();

        let started = Instant::now();
        let model = train(&config, &features, &dataset, &pools, &labels)?;
        let stop_predictions = model.predict(&features, &stop_set)?;
        let n_change = config
            .stopping
            .iter()
            .filter(|s| matches!(s, StoppingConfig::ClassificationChange { .. }))
            .count();
        let mut learner = Self {
            dataset,
            features,
            config,
            pools,
            labels,
            model,
            history: Vec::new(),
            rng,
            phase: Phase::AwaitingQuery,
            pending: Vec::new(),
            stop_set,
            stopping: StoppingState {
                kappa_history: Vec::new(),
                change_states: vec![ChangeState::default(); n_change],
                stop_predictions,
                prev_stop_predictions: None,
            },
        };
        let record = RoundRecord {
            round: 0,
            queried: seed_indices.to_vec(),
            labels: seed_labels.to_vec(),
            labeled_count: learner.pools.labeled().len(),
            stop_predictions_digest: predictions_digest(&learner.stopping.stop_predictions),
            kappa: None,
            change_rate: None,
            stopping: learner.stop_decisions(),
            metrics: None,
            wall_clock_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        learner.history.push(record);
        Ok(learner)
    }

    /// Selects the next batch of `min(k, |unlabeled|)` documents.
    pub fn query(&mut self) -> Result<Vec<usize>> {
        if self.phase == Phase::AwaitingLabels {
            return Err(Error::PendingBatch);
        }
        if self.pools.unlabeled().is_empty() {
            return Err(Error::PoolExhausted);
        }
        let k = self.config.batch_size.min(self.pools.unlabeled().len());
        let labeled = self.pools.labeled().to_vec();
        let mut req = QueryRequest::new(
            &self.model,
            &self.features,
            &labeled,
            self.pools.unlabeled().iter().copied(),
            k,
            &mut self.rng,
        )
        .with_train_config(self.config.train.clone());
        let result = strategies::query(&self.config.strategy, &mut req)?;
        self.pending = result.selected;
        self.phase = Phase::AwaitingLabels;
        Ok(self.pending.clone())
    }

    /// Labels the pending batch, retrains and records the round. Nothing
    /// changes when the label map is rejected.
    pub fn update(&mut self, labels: &BTreeMap<usize, LabelSet>) -> Result<&RoundRecord> {
        if self.phase != Phase::AwaitingLabels {
            return Err(Error::NoPendingBatch);
        }
        let pending: BTreeSet<usize> = self.pending.iter().copied().collect();
        let given: BTreeSet<usize> = labels.keys().copied().collect();
        if pending != given {
            return Err(Error::BatchMismatch {
                missing: pending.difference(&given).copied().collect(),
                extra: given.difference(&pending).copied().collect(),
            });
        }
        for l in labels.values() {
            self.dataset.label_space().validate(l)?;
        }

        let mut pools = self.pools.clone();
        let mut acquired = self.labels.clone();
        for &i in &self.pending {
            pools.transfer(i)?;
            acquired.insert(i, labels[&i].clone());
        }
        let started = Instant::now();
        let model = train(&self.config, &self.features, &self.dataset, &pools, &acquired)?;
        let wall_clock_ms = started.elapsed().as_secs_f64() * 1e3;
        let preds = model.predict(&self.features, &self.stop_set)?;
        let space = self.dataset.label_space();
        let kappa = kappa_for(
            space.mode,
            space.num_classes(),
            &self.stopping.stop_predictions,
            &preds,
        )?;
        let rate = change_rate(&self.stopping.stop_predictions, &preds)?;

        self.pools = pools;
        self.labels = acquired;
        self.model = model;
        self.stopping.kappa_history.push(kappa);
        let mut change_states = self.stopping.change_states.iter_mut();
        for s in &self.config.stopping {
            if let StoppingConfig::ClassificationChange { epsilon, window } = s {
                let state = change_states.next().expect("one state per criterion");
                observe_change_rate(rate, *epsilon, *window, state);
            }
        }
        let prev = std::mem::replace(&mut self.stopping.stop_predictions, preds);
        self.stopping.prev_stop_predictions = Some(prev);

        let queried = std::mem::take(&mut self.pending);
        let record = RoundRecord {
            round: self.history.len(),
            labels: queried.iter().map(|i| labels[i].clone()).collect(),
            queried,
            labeled_count: self.pools.labeled().len(),
            stop_predictions_digest: predictions_digest(&self.stopping.stop_predictions),
            kappa: Some(kappa),
            change_rate: Some(rate),
            stopping: Vec::new(),
            metrics: None,
            wall_clock_ms,
        };
        self.history.push(record);
        self.phase = Phase::AwaitingQuery;
        let decisions = self.stop_decisions();
        let last = self.history.last_mut().expect("just pushed");
        last.stopping = decisions;
        Ok(last)
    }

    /// Decisions of every configured criterion followed by the round budget.
    pub fn stop_decisions(&self) -> Vec<StopDecision> {
        let mut out = Vec::new();
        let mut change_states = self.stopping.change_states.iter();
        for s in &self.config.stopping {
            match s {
                StoppingConfig::KappaAverage { window, kappa } => {
                    out.push(kappa_average_should_stop(
                        &self.stopping.kappa_history,
                        *window,
                        *kappa,
                    ));
                }
                StoppingConfig::ClassificationChange { window, .. } => {
                    let state = change_states.next().expect("one state per criterion");
                    out.push(change_decision(*window, state));
                }
            }
        }
        let rounds = self.round();
        out.push(StopDecision {
            should_stop: rounds >= self.config.max_rounds,
            value: Some(rounds as f64),
            criterion: "max_rounds".into(),
        });
        out
    }

    /// OR over the configured criteria and the round budget. Reports the
    /// first criterion that fires, or the first criterion when none does.
    pub fn should_stop(&self) -> StopDecision {
        let decisions = self.stop_decisions();
        decisions
            .iter()
            .find(|d| d.should_stop)
            .or(decisions.first())
            .cloned()
            .expect("max_rounds is always present")
    }

    /// Attaches evaluation metrics to the latest round.
    pub fn set_metrics(&mut self, metrics: Metrics) {
        if let Some(last) = self.history.last_mut() {
            last.metrics = Some(metrics);
        }
    }

    /// Number of completed query/update rounds.
    pub fn round(&self) -> usize {
        self.history.len().saturating_sub(1)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn pending(&self) -> &[usize] {
        &self.pending
    }

    pub fn pools(&self) -> &PoolState {
        &self.pools
    }

    pub fn labels(&self) -> &BTreeMap<usize, LabelSet> {
        &self.labels
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn history(&self) -> &[RoundRecord] {
        &self.history
    }

    pub fn history_digest(&self) -> String {
        history_digest(&self.history)
    }

    pub fn config(&self) -> &LoopConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn features(&self) -> &Arc<FeatureSet> {
        &self.features
    }

    pub fn stop_set(&self) -> &[usize] {
        &self.stop_set
    }

    pub fn kappa_history(&self) -> &[f64] {
        &self.stopping.kappa_history
    }

    /// Stop-set predictions of the current model.
    pub fn stop_predictions(&self) -> &[LabelSet] {
        &self.stopping.stop_predictions
    }

    /// Stop-set predictions of the model before the last update.
    pub fn previous_stop_predictions(&self) -> Option<&[LabelSet]> {
        self.stopping.prev_stop_predictions.as_deref()
    }

    pub fn rng(&self) -> &Rng {
        &self.rng
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let pools = PoolsFile {
            labeled: self.pools.labeled().to_vec(),
            unlabeled: self.pools.unlabeled_vec(),
            labels: self.labels.iter().map(|(&i, l)| (i, l.clone())).collect(),
        };
        write_atomic(&dir.join("pools.json"), &serde_json::to_vec(&pools)?)?;
        let mut history = Vec::new();
        for r in &self.history {
            serde_json::to_writer(&mut history, r)?;
            history.push(b'\n');
        }
        write_atomic(&dir.join("history.jsonl"), &history)?;
        Checkpoint::new(self.model.clone(), &self.features).save(&dir.join("model.json"))?;
        write_atomic(&dir.join("rng.json"), &serde_json::to_vec(&self.rng)?)?;
        let manifest = serde_json::json!({
            "format_version": FORMAT_VERSION,
            "config": self.config,
            "phase": self.phase,
            "round": self.round(),
            "pending": self.pending,
            "dataset_fingerprint": self.dataset.fingerprint(),
            "stop_set": self.stop_set,
            "stopping_state": self.stopping,
        });
        write_atomic(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    /// Restores a session saved with [`ActiveLearner::save`]. `dataset` and
    /// `features` must be the ones the session was created with.
    pub fn load(dir: &Path, dataset: Arc<Dataset>, features: Arc<FeatureSet>) -> Result<Self> {
        let manifest: serde_json::Value = read_json(&dir.join("manifest.json"), "manifest")?;
        let version: u32 = field(&manifest, "format_version")?;
        if version != FORMAT_VERSION {
            return Err(corrupt("format_version", format!("unsupported version {version}")));
        }
        let config: LoopConfig = field(&manifest, "config")?;
        let phase: Phase = field(&manifest, "phase")?;
        let round: usize = field(&manifest, "round")?;
        let pending: Vec<usize> = field(&manifest, "pending")?;
        let fingerprint: String = field(&manifest, "dataset_fingerprint")?;
        let stop_set: Vec<usize> = field(&manifest, "stop_set")?;
        let stopping: StoppingState = field(&manifest, "stopping_state")?;
        if fingerprint != dataset.fingerprint() {
            return Err(corrupt(
                "dataset_fingerprint",
                "session belongs to a different dataset".into(),
            ));
        }
        if (phase == Phase::AwaitingLabels) == pending.is_empty() {
            return Err(corrupt("pending", "inconsistent with phase".into()));
        }

        let pools_file: PoolsFile = read_json(&dir.join("pools.json"), "pools")?;
        let pools = PoolState::new(
            pools_file.labeled,
            pools_file.unlabeled.into_iter().collect(),
            dataset.len(),
        )
        .map_err(|e| corrupt("pools", e.to_string()))?;
        let labels: BTreeMap<usize, LabelSet> = pools_file.labels.into_iter().collect();
        if pools.labeled().iter().any(|i| !labels.contains_key(i)) {
            return Err(corrupt("labels", "labeled index without a label".into()));
        }
        if pending.iter().any(|&i| !pools.is_unlabeled(i)) {
            return Err(corrupt("pending", "pending index not in the unlabeled pool".into()));
        }

        let history_text = fs::read_to_string(dir.join("history.jsonl"))?;
        let history = history_text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str::<RoundRecord>(l).map_err(|e| corrupt("history", e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if history.len() != round + 1 {
            return Err(corrupt("round", "does not match history length".into()));
        }
        let model = Checkpoint::load(&dir.join("model.json"), &features)?.model;
        let rng: Rng = read_json(&dir.join("rng.json"), "rng")?;

        Ok(Self {
            dataset,
            features,
            config,
            pools,
            labels,
            model,
            history,
            rng,
            phase,
            pending,
            stop_set,
            stopping,
        })
    }
}

fn train(
    config: &LoopConfig,
    features: &FeatureSet,
    dataset: &Dataset,
    pools: &PoolState,
    labels: &BTreeMap<usize, LabelSet>,
) -> Result<Model> {
    let mut rows = pools.labeled().to_vec();
    rows.sort_unstable();
    let targets: Vec<LabelSet> = rows.iter().map(|i| labels[i].clone()).collect();
    Model::fit(
        config.classifier,
        features,
        &rows,
        &targets,
        dataset.label_space(),
        &config.train,
    )
}

fn corrupt(field: &str, message: String) -> Error {
    Error::CorruptSession {
        field: field.to_string(),
        message,
    }
}

fn field<T: DeserializeOwned>(obj: &serde_json::Value, name: &str) -> Result<T> {
    let value = obj
        .get(name)
        .ok_or_else(|| corrupt(name, "missing".into()))?;
    serde_json::from_value(value.clone()).map_err(|e| corrupt(name, e.to_string()))
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| corrupt(what, e.to_string()))
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
