use super::{pairwise_squared, top_k_result, QueryRequest, QueryResult};
use crate::error::Result;

const PROBABILITY_FLOOR: f64 = 1e-8;

fn clamp_renormalize(p: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = p.iter().map(|&v| v.max(PROBABILITY_FLOOR)).collect();
    let sum: f64 = clamped.iter().sum();
    clamped.into_iter().map(|v| v / sum).collect()
}

/// `KL(p ‖ q)` after flooring both distributions at 1e-8 and renormalizing.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let p = clamp_renormalize(p);
    let q = clamp_renormalize(q);
    p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum()
}

/// Contrastive active learning: a candidate scores the mean divergence
/// between the predictions on its nearest labeled neighbours (in embedding
/// space) and its own prediction.
pub fn query_cal(req: &mut QueryRequest<'_>, neighbors: usize) -> Result<QueryResult> {
    req.check_batch()?;
    req.require_labeled()?;
    let clf = req.classifier;
    let cand_emb = clf.embed(req.features, &req.candidates)?;
    let lab_emb = clf.embed(req.features, req.labeled)?;
    let cand_p = clf.predict_proba(req.features, &req.candidates)?;
    let lab_p = clf.predict_proba(req.features, req.labeled)?;
    let dist = pairwise_squared(&cand_emb, &lab_emb);
    let kn = neighbors.min(req.labeled.len());

    let scores = (0..req.candidates.len())
        .map(|i| {
            let mut order: Vec<usize> = (0..req.labeled.len()).collect();
            order.sort_by(|&a, &b| {
                dist[[i, a]]
                    .total_cmp(&dist[[i, b]])
                    .then_with(|| req.labeled[a].cmp(&req.labeled[b]))
            });
            let q = cand_p.row(i).to_vec();
            order[..kn]
                .iter()
                .map(|&j| kl_divergence(&lab_p.row(j).to_vec(), &q))
                .sum::<f64>()
                / kn as f64
        })
        .collect();
    Ok(top_k_result(&req.candidates, scores, req.k))
}
