use std::path::{Path, PathBuf};

use al_core::classification::{ClassifierKind, TrainConfig};
use al_core::corpus::DataFormat;
use al_core::learner::{LoopConfig, DEFAULT_MAX_ROUNDS, DEFAULT_STOP_SET_SIZE};
use al_core::stopping::StoppingConfig;
use al_core::strategies::StrategyConfig;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{ExperimentError, Result};

pub const METRIC_NAMES: [&str; 3] = ["accuracy", "micro_f1", "macro_f1"];

/// One experiment: a dataset, a held-out split and one or more strategies,
/// each run once per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// Inferred from the file extension when absent.
    #[serde(default)]
    pub format: Option<DataFormat>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_classifier")]
    pub classifier: ClassifierKind,
    #[serde(default)]
    pub train: TrainConfig,
    /// A single strategy string or a list of them.
    #[serde(alias = "strategy", deserialize_with = "one_or_many")]
    pub strategies: Vec<StrategyConfig>,
    #[serde(default)]
    pub stopping: Vec<StoppingConfig>,
    pub batch_size: usize,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_stop_set_size")]
    pub stop_set_size: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_seed_size")]
    pub seed_size: usize,
    #[serde(default = "default_min_df")]
    pub min_df: usize,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
}

fn default_test_fraction() -> f64 {
    0.2
}
fn default_classifier() -> ClassifierKind {
    ClassifierKind::SparseLinear
}
fn default_max_rounds() -> usize {
    DEFAULT_MAX_ROUNDS
}
fn default_stop_set_size() -> usize {
    DEFAULT_STOP_SET_SIZE
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_seed_size() -> usize {
    25
}
fn default_min_df() -> usize {
    1
}
fn default_metrics() -> Vec<String> {
    METRIC_NAMES.iter().map(|s| s.to_string()).collect()
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<StrategyConfig>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(StrategyConfig),
        Many(Vec<StrategyConfig>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

impl ExperimentConfig {
    /// Minimal config with defaults for everything optional.
    pub fn new(dataset: impl Into<PathBuf>, strategy: StrategyConfig, batch_size: usize) -> Self {
        Self {
            dataset: dataset.into(),
            format: None,
            test_fraction: default_test_fraction(),
            split_seed: 0,
            classifier: default_classifier(),
            train: TrainConfig::default(),
            strategies: vec![strategy],
            stopping: Vec::new(),
            batch_size,
            max_rounds: default_max_rounds(),
            stop_set_size: default_stop_set_size(),
            seeds: default_seeds(),
            seed_size: default_seed_size(),
            min_df: default_min_df(),
            metrics: default_metrics(),
        }
    }

    /// Reads a JSON config. Relative dataset paths resolve against the
    /// config file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: Self =
            serde_json::from_str(&text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        if config.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                config.dataset = dir.join(&config.dataset);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn format(&self) -> DataFormat {
        self.format.unwrap_or_else(|| DataFormat::from_path(&self.dataset))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.seed_size == 0 {
            return bad("seed_size must be ≥ 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be ≥ 1".into());
        }
        if self.min_df == 0 {
            return bad("min_df must be ≥ 1".into());
        }
        if let Some(m) = self.metrics.iter().find(|m| !METRIC_NAMES.contains(&m.as_str())) {
            return bad(format!("unknown metric `{m}`"));
        }
        let mut ids: Vec<String> = self.strategies.iter().map(|s| s.to_string()).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("strategies must be distinct".into());
        }
        self.train.validate().map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Loop configuration of one strategy run with `seed`.
    pub fn loop_config(&self, strategy: &StrategyConfig, seed: u64) -> LoopConfig {
        LoopConfig {
            classifier: self.classifier,
            train: TrainConfig {
                seed: self.train.seed.wrapping_add(seed),
                ..self.train.clone()
            },
            strategy: strategy.clone(),
            stopping: self.stopping.clone(),
            batch_size: self.batch_size,
            max_rounds: self.max_rounds,
            seed,
            stop_set_size: self.stop_set_size,
        }
    }
}
