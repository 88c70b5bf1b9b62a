use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use al_core::classification::TextClassifier;
use al_core::corpus::{load_dataset, Dataset, FeatureSet, LabelSet};
use al_core::learner::{write_atomic, ActiveLearner, RoundRecord};
use al_core::metrics::{compute_metrics, Metrics};
use al_core::rng::splitmix64;
use al_core::strategies::StrategyConfig;
use al_core::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{ExperimentError, Result};
use crate::split::{stratified_seed_set, stratified_split};

pub const CURVE_HEADER: &str = "seed,round,labeled,accuracy,micro_f1,macro_f1";
const SEED_SET_SALT: u64 = 0x5EED_5E75_0000_0001;

/// One learning-curve point, measured on the held-out test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub seed: u64,
    pub round: usize,
    pub labeled: usize,
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

impl MetricRecord {
    fn metric(&self, name: &str) -> f64 {
        match name {
            "accuracy" => self.accuracy,
            "micro_f1" => self.micro_f1,
            "macro_f1" => self.macro_f1,
            other => unreachable!("metric names are validated: {other}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub strategy: StrategyConfig,
    pub seed: u64,
    pub records: Vec<MetricRecord>,
    pub history: Vec<RoundRecord>,
    /// The criterion that ended the run; `None` when the pool ran out first.
    pub stopped_by: Option<String>,
}

/// Dataset, features and split shared by every run of an experiment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Arc<Dataset>,
    pub features: Arc<FeatureSet>,
    pub truth: Vec<LabelSet>,
    pub pool: Vec<usize>,
    pub test: Vec<usize>,
}

impl Prepared {
    pub fn new(dataset: Dataset, config: &ExperimentConfig) -> Result<Self> {
        let unlabeled = dataset.labels().iter().filter(|l| l.is_none()).count();
        if unlabeled > 0 {
            return Err(ExperimentError::OracleRequiresLabels { unlabeled });
        }
        let truth: Vec<LabelSet> = dataset.labels().iter().flatten().cloned().collect();
        let (pool, test) = stratified_split(&truth, config.test_fraction, config.split_seed)?;
        let features = FeatureSet::build(dataset.docs(), config.min_df)?;
        Ok(Self {
            dataset: Arc::new(dataset),
            features: Arc::new(features),
            truth,
            pool,
            test,
        })
    }

    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let dataset = load_dataset(&config.dataset, config.format(), None)?;
        Self::new(dataset, config)
    }

    fn evaluate(&self, learner: &ActiveLearner) -> Result<Metrics> {
        let predictions = learner.model().predict(&self.features, &self.test)?;
        let truth: Vec<LabelSet> = self.test.iter().map(|&i| self.truth[i].clone()).collect();
        Ok(compute_metrics(&truth, &predictions, self.dataset.label_space())?)
    }
}

/// Runs one strategy with one seed, answering every query from the ground
/// truth, until a stopping criterion fires or the pool is exhausted.
pub fn run_one(config: &ExperimentConfig, prepared: &Prepared, strategy: &StrategyConfig, seed: u64) -> Result<RunResult> {
    let mut seed_rng = Rng::new(splitmix64(seed ^ SEED_SET_SALT));
    let seeds = stratified_seed_set(&prepared.pool, &prepared.truth, config.seed_size, &mut seed_rng)?;
    let seed_labels: Vec<LabelSet> = seeds.iter().map(|&i| prepared.truth[i].clone()).collect();
    let mut learner = ActiveLearner::initialize(
        prepared.dataset.clone(),
        prepared.features.clone(),
        Some(prepared.pool.clone()),
        &seeds,
        &seed_labels,
        config.loop_config(strategy, seed),
    )?;
    let mut records = Vec::new();
    let mut stopped_by = None;
    loop {
        let m = prepared.evaluate(&learner)?;
        records.push(MetricRecord {
            seed,
            round: learner.round(),
            labeled: learner.pools().labeled().len(),
            accuracy: m.accuracy,
            micro_f1: m.micro_f1,
            macro_f1: m.macro_f1,
        });
        learner.set_metrics(m);
        let decision = learner.should_stop();
        if decision.should_stop {
            stopped_by = Some(decision.criterion);
            break;
        }
        if learner.pools().unlabeled().is_empty() {
            break;
        }
        let batch = learner.query()?;
        let answers: BTreeMap<usize, LabelSet> =
            batch.iter().map(|&i| (i, prepared.truth[i].clone())).collect();
        learner.update(&answers)?;
    }
    Ok(RunResult {
        strategy: strategy.clone(),
        seed,
        records,
        history: learner.history().to_vec(),
        stopped_by,
    })
}

/// Runs every seed of `strategy`, in parallel, returning results in seed
/// order.
pub fn run_strategy(config: &ExperimentConfig, prepared: &Prepared, strategy: &StrategyConfig) -> Result<Vec<RunResult>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut results = Vec::with_capacity(config.seeds.len());
    for chunk in config.seeds.chunks(workers) {
        let chunk_results: Vec<Result<RunResult>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&seed| s.spawn(move || run_one(config, prepared, strategy, seed)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("run thread panicked"))
                .collect()
        });
        for r in chunk_results {
            results.push(r?);
        }
    }
    Ok(results)
}

/// Normalized area under a learning curve: trapezoidal area over the labeled
/// axis divided by its range. A single point yields its own value.
pub fn area_under_curve(records: &[MetricRecord], metric: &str) -> f64 {
    match records {
        [] => 0.0,
        [only] => only.metric(metric),
        [first, .., last] => {
            let area: f64 = records
                .windows(2)
                .map(|w| (w[1].labeled - w[0].labeled) as f64 * (w[0].metric(metric) + w[1].metric(metric)) / 2.0)
                .sum();
            area / (last.labeled - first.labeled) as f64
        }
    }
}

pub fn learning_curve_csv(runs: &[RunResult]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in runs.iter().flat_map(|run| &run.records) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seed, r.round, r.labeled, r.accuracy, r.micro_f1, r.macro_f1
        )
        .expect("writing to a string");
    }
    out
}

#[derive(Serialize)]
struct SelectionLine<'a> {
    seed: u64,
    round: usize,
    labeled: usize,
    queried: &'a [usize],
    labels: Vec<Vec<&'a str>>,
    kappa: Option<f64>,
    change_rate: Option<f64>,
    should_stop: bool,
}

pub fn selections_jsonl(runs: &[RunResult], dataset: &Dataset) -> Result<String> {
    let names = &dataset.label_space().class_names;
    let mut out = String::new();
    for run in runs {
        for h in &run.history {
            let line = SelectionLine {
                seed: run.seed,
                round: h.round,
                labeled: h.labeled_count,
                queried: &h.queried,
                labels: h
                    .labels
                    .iter()
                    .map(|l| l.classes().iter().map(|&c| names[c].as_str()).collect())
                    .collect(),
                kappa: h.kappa,
                change_rate: h.change_rate,
                should_stop: h.stopping.iter().any(|d| d.should_stop),
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub rounds: usize,
    pub final_labeled: usize,
    pub stopped_by: Option<String>,
    /// Rounds until a stopping criterion fired; `None` when none did.
    pub rounds_to_stop: Option<usize>,
    #[serde(rename = "final")]
    pub final_metrics: BTreeMap<String, f64>,
    pub auc: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    /// Output directory of this strategy relative to the experiment output.
    pub directory: String,
    pub runs: Vec<RunSummary>,
    pub mean_final: BTreeMap<String, f64>,
    pub mean_auc: BTreeMap<String, f64>,
    pub mean_rounds_to_stop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset: String,
    pub dataset_fingerprint: String,
    pub pool_size: usize,
    pub test_size: usize,
    pub seeds: Vec<u64>,
    pub strategies: Vec<StrategySummary>,
}

fn summarize(config: &ExperimentConfig, strategy: &StrategyConfig, directory: String, runs: &[RunResult]) -> StrategySummary {
    let run_summaries: Vec<RunSummary> = runs
        .iter()
        .map(|run| {
            let last = run.records.last().expect("every run records round 0");
            let pick = |f: &dyn Fn(&str) -> f64| -> BTreeMap<String, f64> {
                config.metrics.iter().map(|m| (m.clone(), f(m))).collect()
            };
            RunSummary {
                seed: run.seed,
                rounds: last.round,
                final_labeled: last.labeled,
                stopped_by: run.stopped_by.clone(),
                rounds_to_stop: run.stopped_by.as_ref().map(|_| last.round),
                final_metrics: pick(&|m| last.metric(m)),
                auc: pick(&|m| area_under_curve(&run.records, m)),
            }
        })
        .collect();
    let n = run_summaries.len() as f64;
    let mean = |get: &dyn Fn(&RunSummary) -> &BTreeMap<String, f64>| -> BTreeMap<String, f64> {
        config
            .metrics
            .iter()
            .map(|m| (m.clone(), run_summaries.iter().map(|r| get(r)[m]).sum::<f64>() / n))
            .collect()
    };
    let stops: Vec<f64> = run_summaries.iter().filter_map(|r| r.rounds_to_stop).map(|r| r as f64).collect();
    StrategySummary {
        strategy: strategy.to_string(),
        directory,
        mean_final: mean(&|r| &r.final_metrics),
        mean_auc: mean(&|r| &r.auc),
        mean_rounds_to_stop: (!stops.is_empty()).then(|| stops.iter().sum::<f64>() / stops.len() as f64),
        runs: run_summaries,
    }
}

/// Directory name for a strategy's outputs within a multi-strategy run.
pub fn strategy_dir_name(strategy: &StrategyConfig) -> String {
    strategy
        .to_string()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '-' })
        .collect()
}

/// Runs the whole experiment and writes its result files to `out_dir`.
///
/// With a single strategy `learning_curve.csv` and `selections.jsonl` sit
/// directly in `out_dir`; with several, each strategy gets a subdirectory.
/// `summary.json` always sits in `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<Summary> {
    config.validate()?;
    let prepared = Prepared::load(config)?;
    run_prepared(config, &prepared, out_dir)
}

pub fn run_prepared(config: &ExperimentConfig, prepared: &Prepared, out_dir: &Path) -> Result<Summary> {
    std::fs::create_dir_all(out_dir)?;
    let mut summaries = Vec::new();
    for strategy in &config.strategies {
        let runs = run_strategy(config, prepared, strategy)?;
        let (dir, rel): (PathBuf, String) = if config.strategies.len() == 1 {
            (out_dir.to_path_buf(), ".".into())
        } else {
            let name = strategy_dir_name(strategy);
            (out_dir.join(&name), name)
        };
        std::fs::create_dir_all(&dir)?;
        write_atomic(&dir.join("learning_curve.csv"), learning_curve_csv(&runs).as_bytes())?;
        write_atomic(
            &dir.join("selections.jsonl"),
            selections_jsonl(&runs, &prepared.dataset)?.as_bytes(),
        )?;
        summaries.push(summarize(config, strategy, rel, &runs));
    }
    let summary = Summary {
        dataset: config.dataset.display().to_string(),
        dataset_fingerprint: prepared.dataset.fingerprint(),
        pool_size: prepared.pool.len(),
        test_size: prepared.test.len(),
        seeds: config.seeds.clone(),
        strategies: summaries,
    };
    write_atomic(&out_dir.join("summary.json"), &serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}
