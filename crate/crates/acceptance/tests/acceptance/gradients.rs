//! Analytic gradients against central finite differences.

use al_core::classification::{EglGroup, EmbedAvgLinear, TextClassifier, TrainConfig};
use al_core::corpus::{FeatureSet, LabelMode, LabelSet, LabelSpace};
use al_core::rng::Rng;

use crate::oracles::{embed_avg_loss, fd_group_norms, norm, relative_error, softmax};
use crate::Outcome;

pub const STEP: f64 = 1e-4;
pub const TOLERANCE: f64 = 1e-4;
const PROBES_PER_MODEL: usize = 25;
const MODELS: u64 = 5;

pub struct Probe {
    pub model: EmbedAvgLinear,
    pub features: FeatureSet,
}

/// A small model trained on random token documents, with a few extra
/// documents to probe (repeated tokens and an empty document included).
pub fn trained_probe(seed: u64, classes: usize, dim: usize) -> Probe {
    let mut rng = Rng::new(seed);
    let vocab = 12;
    let mut docs: Vec<Vec<u32>> = (0..40)
        .map(|_| {
            let len = 1 + rng.below(6);
            (0..len).map(|_| rng.below(vocab) as u32).collect()
        })
        .collect();
    docs.push(vec![3, 3, 3, 5]);
    docs.push(vec![]);
    let labels: Vec<LabelSet> = (0..40)
        .map(|i| LabelSet::single((docs[i][0] as usize + i) % classes))
        .collect();
    let names = (0..classes).map(|c| format!("k{c}")).collect();
    let space = LabelSpace::new(LabelMode::SingleLabel, names).unwrap();
    let features = FeatureSet::from_tokens(vocab, docs);
    let config = TrainConfig { epochs: 5, seed, ..Default::default() };
    let rows: Vec<usize> = (0..40).collect();
    let (model, _) = EmbedAvgLinear::fit_traced(&features, &rows, &labels, &space, &config, dim).unwrap();
    Probe { model, features }
}

fn to_rows(a: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Relative errors on one document: gradient embedding, then the softmax,
/// word and full groups (worst over hypothetical classes).
pub fn probe_errors(p: &Probe, row: usize) -> Result<[f64; 4], String> {
    let m = &p.model;
    let e = to_rows(&m.embeddings);
    let w = to_rows(&m.weights);
    let b = m.bias.to_vec();
    let toks: Vec<usize> = p.features.tokens(row).iter().map(|&t| t as usize).collect();
    let classes = w.len();
    let d = w[0].len();

    // predicted class from an independent forward pass
    let h: Vec<f64> = (0..d)
        .map(|j| {
            if toks.is_empty() {
                0.0
            } else {
                toks.iter().map(|&t| e[t][j]).sum::<f64>() / toks.len() as f64
            }
        })
        .collect();
    let z: Vec<f64> = (0..classes)
        .map(|c| w[c].iter().zip(&h).map(|(a, x)| a * x).sum::<f64>() + b[c])
        .collect();
    let probs = softmax(&z);
    let mut yhat = 0;
    for c in 1..classes {
        if probs[c] > probs[yhat] {
            yhat = c;
        }
    }
    let mut fd = Vec::with_capacity(classes * d);
    let mut w2 = w.clone();
    for c in 0..classes {
        for j in 0..d {
            let orig = w2[c][j];
            w2[c][j] = orig + STEP;
            let plus = embed_avg_loss(&e, &w2, &b, &toks, yhat);
            w2[c][j] = orig - STEP;
            let minus = embed_avg_loss(&e, &w2, &b, &toks, yhat);
            w2[c][j] = orig;
            fd.push((plus - minus) / (2.0 * STEP));
        }
    }
    let g = m
        .gradient_embedding(&p.features, &[row])
        .map_err(|e| e.to_string())?
        .row(0)
        .to_vec();
    let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
    let ge_err = norm(&diff) / norm(&g).max(norm(&fd)).max(1e-8);

    let groups = [EglGroup::Softmax, EglGroup::Word, EglGroup::Full];
    let mut errs = [ge_err, 0.0, 0.0, 0.0];
    let analytic: Vec<Vec<f64>> = groups
        .iter()
        .map(|&gr| {
            m.egl_gradient_norms(&p.features, &[row], gr)
                .map(|a| a.row(0).to_vec())
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    for c in 0..classes {
        let (sm, word, full) = fd_group_norms(&e, &w, &b, &toks, c, STEP);
        for (slot, numeric) in [sm, word, full].into_iter().enumerate() {
            let err = relative_error(analytic[slot][c], numeric);
            errs[slot + 1] = errs[slot + 1].max(err);
        }
    }
    Ok(errs)
}

pub fn criterion() -> Outcome {
    let mut worst = [0.0f64; 4];
    let mut probes = 0;
    let mut failures = Vec::new();
    for s in 0..MODELS {
        let classes = 2 + (s as usize % 3);
        let probe = trained_probe(100 + s, classes, 6 + s as usize);
        let n = probe.features.len();
        // the last two documents are the repeated-token and empty cases
        let rows = (0..PROBES_PER_MODEL - 2).chain([n - 2, n - 1]);
        for row in rows {
            probes += 1;
            match crate::guarded(|| probe_errors(&probe, row)) {
                Ok(errs) => {
                    for i in 0..4 {
                        worst[i] = worst[i].max(errs[i]);
                    }
                    if errs.iter().any(|&e| !(e <= TOLERANCE)) {
                        failures.push(format!("model {s} row {row}: errors {errs:?}"));
                    }
                }
                Err(e) => failures.push(format!("model {s} row {row}: {e}")),
            }
        }
    }
    let summary = format!(
        "{probes} probes per quantity; max rel err gradient_embedding {:.1e}, egl softmax {:.1e}, word {:.1e}, full {:.1e} (limit {TOLERANCE:.0e})",
        worst[0], worst[1], worst[2], worst[3]
    );
    let pass = failures.is_empty() && probes >= 100;
    Outcome { pass, summary, details: failures.into_iter().take(10).collect() }
}
