use std::collections::BTreeSet;

use ndarray::Axis;

use super::{pairwise_squared, squared_distance, QueryRequest};
use crate::error::Result;

/// SEALS candidate restriction: the union of each labeled example's
/// `neighbors` nearest unlabeled candidates (exact Euclidean search). If that
/// leaves fewer than `k` candidates, the remainder is filled with the
/// candidates closest to the labeled centroid.
pub fn seals_restrict(req: &QueryRequest<'_>, neighbors: usize) -> Result<Vec<usize>> {
    req.check_batch()?;
    req.require_labeled()?;
    let lab = req.classifier.embed(req.features, req.labeled)?;
    let cand = req.classifier.embed(req.features, &req.candidates)?;
    let dist = pairwise_squared(&lab, &cand);
    let n = req.candidates.len();
    let kn = neighbors.min(n);

    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    for l in 0..lab.nrows() {
        let mut order: Vec<usize> = (0..n).collect();
        // candidates are ascending, so position order is the index tie-break
        order.sort_by(|&a, &b| dist[[l, a]].total_cmp(&dist[[l, b]]).then(a.cmp(&b)));
        chosen.extend(order.into_iter().take(kn));
    }
    if chosen.len() < req.k {
        let centroid = lab.mean_axis(Axis(0)).expect("labeled set is non-empty");
        let mut rest: Vec<(f64, usize)> = (0..n)
            .filter(|p| !chosen.contains(p))
            .map(|p| (squared_distance(cand.row(p), centroid.view()), p))
            .collect();
        rest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let missing = req.k - chosen.len();
        chosen.extend(rest.into_iter().take(missing).map(|(_, p)| p));
    }
    Ok(chosen.into_iter().map(|p| req.candidates[p]).collect())
}
