use ndarray::{concatenate, Axis};

use super::{top_k, QueryRequest, QueryResult};
use crate::classification::{DenseSoftmax, TrainConfig};
use crate::error::{Error, Result};

/// Discriminative active learning.
///
/// Over `sub_iterations` rounds a binary head learns to tell labeled
/// (class 0) from unlabeled (class 1) embeddings; the `⌈k/r⌉` candidates it
/// is most confident are unlabeled get selected and join the labeled side for
/// the next round.
pub fn query_dal(req: &mut QueryRequest<'_>, sub_iterations: usize) -> Result<QueryResult> {
    req.check_batch()?;
    req.require_labeled()?;
    if sub_iterations == 0 {
        return Err(Error::InvalidParameter("sub_iterations must be ≥ 1".into()));
    }
    let lab = req.classifier.embed(req.features, req.labeled)?;
    let cand = req.classifier.embed(req.features, &req.candidates)?;
    let per_round = req.k.div_ceil(sub_iterations);

    let mut labeled_side: Vec<usize> = Vec::new(); // candidate positions moved over
    let mut remaining: Vec<usize> = (0..req.candidates.len()).collect();
    let mut selected: Vec<usize> = Vec::with_capacity(req.k);

    for round in 0..sub_iterations {
        if selected.len() >= req.k || remaining.is_empty() {
            break;
        }
        let moved = cand.select(Axis(0), &labeled_side);
        let rest = cand.select(Axis(0), &remaining);
        let x = concatenate(Axis(0), &[lab.view(), moved.view(), rest.view()])
            .expect("embedding widths agree");
        let n_zero = lab.nrows() + moved.nrows();
        let targets: Vec<usize> = (0..x.nrows()).map(|i| usize::from(i >= n_zero)).collect();
        let config = TrainConfig {
            seed: req.train.seed.wrapping_add(round as u64),
            ..req.train.clone()
        };
        let head = DenseSoftmax::fit(x.view(), &targets, 2, &config)?;
        let p = head.predict_proba(rest.view());
        let scores: Vec<f64> = p.column(1).to_vec();
        let ids: Vec<usize> = remaining.iter().map(|&pos| req.candidates[pos]).collect();
        let take = per_round.min(req.k - selected.len());
        let picked: Vec<usize> = top_k(&ids, &scores, take)
            .into_iter()
            .map(|i| remaining[i])
            .collect();
        for &pos in &picked {
            selected.push(pos);
            labeled_side.push(pos);
        }
        remaining.retain(|pos| !picked.contains(pos));
    }
    selected.truncate(req.k);
    debug_assert_eq!(selected.len(), req.k);
    Ok(QueryResult {
        selected: selected.into_iter().map(|p| req.candidates[p]).collect(),
        scores: None,
    })
}
