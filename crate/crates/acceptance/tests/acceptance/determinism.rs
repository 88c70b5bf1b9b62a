//! Byte-identical experiment output and resume-equals-uninterrupted.

use std::collections::BTreeMap;
use std::sync::Arc;

use al_core::classification::ClassifierKind;
use al_core::corpus::{Dataset, FeatureSet, LabelSet};
use al_core::learner::{ActiveLearner, LoopConfig, Phase};
use al_experiment::synth::{generate, SynthConfig};
use al_experiment::{run_experiment, ExperimentConfig};

use crate::Outcome;

const ROUNDS: usize = 5;
const SAVE_AFTER: usize = 2;

pub struct Corpus {
    pub dataset: Arc<Dataset>,
    pub features: Arc<FeatureSet>,
    pub truth: Vec<LabelSet>,
}

pub fn corpus(docs: usize, seed: u64) -> Corpus {
    let dataset = generate(&SynthConfig::new(docs, 2, seed)).unwrap();
    let truth = dataset.labels().iter().map(|l| l.clone().unwrap()).collect();
    let features = FeatureSet::build(dataset.docs(), 1).unwrap();
    Corpus { dataset: Arc::new(dataset), features: Arc::new(features), truth }
}

/// Five documents of each class.
pub fn seed_set(c: &Corpus) -> (Vec<usize>, Vec<LabelSet>) {
    let mut idx = Vec::new();
    for class in 0..2 {
        idx.extend((0..c.truth.len()).filter(|&i| c.truth[i].primary() == Some(class)).take(5));
    }
    idx.sort_unstable();
    let labels = idx.iter().map(|&i| c.truth[i].clone()).collect();
    (idx, labels)
}

pub fn answers(c: &Corpus, batch: &[usize]) -> BTreeMap<usize, LabelSet> {
    batch.iter().map(|&i| (i, c.truth[i].clone())).collect()
}

pub fn learner(c: &Corpus, config: LoopConfig) -> Result<ActiveLearner, String> {
    let (idx, labels) = seed_set(c);
    ActiveLearner::initialize(c.dataset.clone(), c.features.clone(), None, &idx, &labels, config)
        .map_err(|e| e.to_string())
}

fn loop_config(strategy: &str, classifier: ClassifierKind, seed: u64) -> LoopConfig {
    let mut cfg = LoopConfig::new(classifier, strategy.parse().unwrap(), 8);
    cfg.seed = seed;
    cfg.train.seed = seed;
    cfg.train.epochs = 5;
    cfg.stopping = vec!["kappa_average".parse().unwrap(), "classification_change".parse().unwrap()];
    cfg.stop_set_size = 100;
    cfg
}

/// Rounds 1..=ROUNDS uninterrupted versus saved and reloaded part-way.
/// With `mid_batch` the save happens after the next query, before labels.
pub fn resume_matches(strategy: &str, classifier: ClassifierKind, seed: u64, mid_batch: bool) -> Result<(), String> {
    let c = corpus(240, 11);
    let cfg = loop_config(strategy, classifier, seed);

    let mut straight = learner(&c, cfg.clone())?;
    let mut want = Vec::new();
    for _ in 0..ROUNDS {
        let batch = straight.query().map_err(|e| e.to_string())?;
        straight.update(&answers(&c, &batch)).map_err(|e| e.to_string())?;
        want.push(batch);
    }

    let mut first = learner(&c, cfg)?;
    for _ in 0..SAVE_AFTER {
        let batch = first.query().map_err(|e| e.to_string())?;
        first.update(&answers(&c, &batch)).map_err(|e| e.to_string())?;
    }
    let pending = if mid_batch { first.query().map_err(|e| e.to_string())? } else { Vec::new() };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    first.save(dir.path()).map_err(|e| e.to_string())?;
    let digest = first.history_digest();
    drop(first);

    let mut resumed = ActiveLearner::load(dir.path(), c.dataset.clone(), c.features.clone())
        .map_err(|e| e.to_string())?;
    ensure!(resumed.history_digest() == digest, "history digest changed across save/load");
    let mut got = Vec::new();
    if mid_batch {
        ensure!(resumed.phase() == Phase::AwaitingLabels, "pending phase not restored");
        ensure!(resumed.pending() == pending, "pending batch not restored");
        resumed.update(&answers(&c, &pending)).map_err(|e| e.to_string())?;
        got.push(pending);
    }
    while got.len() + SAVE_AFTER < ROUNDS {
        let batch = resumed.query().map_err(|e| e.to_string())?;
        resumed.update(&answers(&c, &batch)).map_err(|e| e.to_string())?;
        got.push(batch);
    }
    ensure!(
        got == want[SAVE_AFTER..],
        "{strategy} seed {seed}: rounds 3-5 {got:?} vs uninterrupted {:?}",
        &want[SAVE_AFTER..]
    );
    ensure!(
        resumed.history_digest() == straight.history_digest(),
        "{strategy} seed {seed}: final history digests differ"
    );
    Ok(())
}

/// Two identical experiment invocations write identical result files.
pub fn identical_invocations() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data.csv");
    let ds = generate(&SynthConfig::new(300, 2, 5)).map_err(|e| e.to_string())?;
    al_core::corpus::export_dataset(&ds, &data, al_core::corpus::DataFormat::Csv)
        .map_err(|e| e.to_string())?;
    let mut config = ExperimentConfig::new(&data, "breaking_ties".parse().unwrap(), 10);
    config.strategies.push("lightweight_coreset".parse().unwrap());
    config.seeds = vec![0, 1];
    config.seed_size = 10;
    config.max_rounds = 4;
    config.stopping = vec!["kappa_average".parse().unwrap()];
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        run_experiment(&config, &out).map_err(|e| e.to_string())?;
        let mut files = Vec::new();
        for s in ["breaking_ties", "lightweight_coreset"] {
            for f in ["learning_curve.csv", "selections.jsonl"] {
                let bytes = std::fs::read(out.join(s).join(f)).map_err(|e| format!("{s}/{f}: {e}"))?;
                files.push(bytes);
            }
        }
        outputs.push(files);
    }
    ensure!(outputs[0] == outputs[1], "result files differ between identical invocations");
    ensure!(
        String::from_utf8_lossy(&outputs[0][0]).lines().count() > 2,
        "learning curve has no rows"
    );
    Ok(())
}

pub fn criterion() -> Outcome {
    let mut details = Vec::new();
    let a = crate::guarded(identical_invocations);
    if let Err(e) = &a {
        details.push(format!("(a) {e}"));
    }
    let cases = [
        ("breaking_ties", ClassifierKind::SparseLinear),
        ("badge", ClassifierKind::EmbedAvgLinear),
        ("lightweight_coreset", ClassifierKind::SparseLinear),
    ];
    let mut resumed_ok = 0;
    for (strategy, classifier) in cases {
        for seed in [3u64, 4] {
            let mid_batch = seed == 4;
            match crate::guarded(|| resume_matches(strategy, classifier, seed, mid_batch)) {
                Ok(()) => resumed_ok += 1,
                Err(e) => details.push(format!("(b) {strategy} seed {seed}: {e}")),
            }
        }
    }
    Outcome {
        pass: a.is_ok() && resumed_ok == 6,
        summary: format!(
            "(a) identical invocations byte-identical: {}; (b) resumed trajectories equal: {resumed_ok}/6 (3 strategies x 2 seeds, one save between rounds and one mid-batch)",
            a.is_ok()
        ),
        details,
    }
}
