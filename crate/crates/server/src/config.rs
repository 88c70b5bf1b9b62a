use std::path::PathBuf;
use std::sync::Arc;

use al_core::classification::{ClassifierKind, TrainConfig};
use al_core::corpus::{load_dataset, DataFormat, FeatureSet, LabelMode, LabelSpace};
use al_core::learner::LoopConfig;
use al_core::stopping::StoppingConfig;
use al_core::strategies::StrategyConfig;
use clap::Args;

use crate::state::AppState;

/// Rounds are open-ended for a human annotator; stopping is advisory.
pub const SERVICE_MAX_ROUNDS: usize = 1_000_000;

#[derive(Debug, Clone, Args)]
pub struct AppConfig {
    /// Corpus (CSV or JSONL). Labeled rows form the seed set.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Query strategy id, e.g. `breaking_ties` or `badge:subsample=2000`.
    #[arg(long, default_value = "breaking_ties")]
    pub strategy: StrategyConfig,
    #[arg(long, default_value = "sparse_linear")]
    pub classifier: ClassifierKind,
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    #[arg(long, default_value = "sessions")]
    pub session_dir: PathBuf,
    /// Directory with a built UI bundle (`index.html`).
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    /// Comma-separated class names; inferred from labeled rows otherwise.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    #[arg(long)]
    pub multi_label: bool,
    /// Stopping criteria; both defaults when omitted.
    #[arg(long = "stopping")]
    pub stopping: Vec<StoppingConfig>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub min_df: usize,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

impl AppConfig {
    pub fn new(dataset: impl Into<PathBuf>, session_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            strategy: "breaking_ties".parse().expect("builtin strategy"),
            classifier: ClassifierKind::SparseLinear,
            batch_size: 10,
            session_dir: session_dir.into(),
            ui_dir: None,
            classes: None,
            multi_label: false,
            stopping: Vec::new(),
            seed: 0,
            min_df: 1,
            learning_rate: None,
            epochs: None,
        }
    }

    pub fn loop_config(&self) -> LoopConfig {
        let mut train = TrainConfig::default();
        if let Some(lr) = self.learning_rate {
            train.learning_rate = lr;
        }
        if let Some(epochs) = self.epochs {
            train.epochs = epochs;
        }
        let stopping = if self.stopping.is_empty() {
            vec![
                "kappa_average".parse().expect("builtin criterion"),
                "classification_change".parse().expect("builtin criterion"),
            ]
        } else {
            self.stopping.clone()
        };
        LoopConfig {
            train,
            stopping,
            max_rounds: SERVICE_MAX_ROUNDS,
            seed: self.seed,
            ..LoopConfig::new(self.classifier, self.strategy.clone(), self.batch_size)
        }
    }

    /// Loads the corpus, builds features and reopens saved sessions.
    pub fn open(&self) -> al_core::Result<AppState> {
        let space = match &self.classes {
            Some(names) => {
                let mode = if self.multi_label {
                    LabelMode::MultiLabel
                } else {
                    LabelMode::SingleLabel
                };
                Some(LabelSpace::new(mode, names.clone())?)
            }
            None => None,
        };
        let dataset = load_dataset(&self.dataset, DataFormat::from_path(&self.dataset), space)?;
        if self.multi_label && !dataset.label_space().is_multi_label() {
            return Err(al_core::Error::LabelSpace(
                "--multi-label needs --classes or multi-label rows".into(),
            ));
        }
        let features = FeatureSet::build(dataset.docs(), self.min_df)?;
        AppState::open(
            Arc::new(dataset),
            Arc::new(features),
            self.loop_config(),
            self.session_dir.clone(),
            self.ui_dir.clone(),
        )
    }
}
