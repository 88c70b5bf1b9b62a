use ndarray::{Array2, Axis};

use super::{map_positions, squared_distance, QueryRequest, QueryResult};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// k-means++ seeding over the rows of `x`.
///
/// The first row is drawn uniformly; each further row with probability
/// proportional to its squared distance to the closest row chosen so far.
/// When every remaining row has distance zero the draw falls back to uniform
/// over the rows not yet chosen.
pub fn kmeans_pp_seeding(x: &Array2<f64>, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    seeding(x, k, rng, None)
}

/// Seeding where rows with `weighted[i] == false` get no distance mass: they
/// can be the uniform first draw or a uniform fallback draw, never a
/// distance-proportional one.
fn seeding(x: &Array2<f64>, k: usize, rng: &mut Rng, weighted: Option<&[bool]>) -> Result<Vec<usize>> {
    let n = x.nrows();
    if k > n {
        return Err(Error::BatchTooLarge { k, available: n });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut chosen = vec![false; n];
    let first = rng.below(n);
    chosen[first] = true;
    let mut selected = vec![first];
    let mut min_d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(x.row(i), x.row(first)))
        .collect();

    while selected.len() < k {
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                let eligible = weighted.is_none_or(|w| w[i]);
                if chosen[i] || !eligible {
                    0.0
                } else {
                    min_d2[i]
                }
            })
            .collect();
        let next = match rng.weighted_index(&weights) {
            Some(i) => i,
            None => {
                let remaining: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
                remaining[rng.below(remaining.len())]
            }
        };
        chosen[next] = true;
        selected.push(next);
        for (i, d) in min_d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(x.row(i), x.row(next)));
        }
    }
    Ok(selected)
}

/// BADGE: k-means++ seeding over last-layer gradient embeddings.
///
/// A candidate whose gradient embedding is exactly zero (a certain
/// prediction) carries no distance mass, so it is only picked as the uniform
/// first draw or once every other remaining candidate duplicates a chosen one.
pub fn query_badge(req: &mut QueryRequest<'_>) -> Result<QueryResult> {
    req.check_batch()?;
    let g = req.classifier.gradient_embedding(req.features, &req.candidates)?;
    let nonzero: Vec<bool> = g.rows().into_iter().map(|r| r.iter().any(|&v| v != 0.0)).collect();
    let positions = seeding(&g, req.k, req.rng, Some(&nonzero))?;
    Ok(map_positions(&req.candidates, positions, None))
}

fn nearest(x: &Array2<f64>, point: usize, centroids: &Array2<f64>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, row) in centroids.axis_iter(Axis(0)).enumerate() {
        let d = squared_distance(x.row(point), row);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Lloyd's algorithm from a k-means++ start. Empty clusters keep their
/// previous centroid.
pub(crate) fn kmeans(x: &Array2<f64>, k: usize, iterations: usize, rng: &mut Rng) -> Result<Array2<f64>> {
    let init = kmeans_pp_seeding(x, k, rng)?;
    let mut centroids = x.select(Axis(0), &init);
    for _ in 0..iterations {
        let assignment: Vec<usize> = (0..x.nrows()).map(|i| nearest(x, i, &centroids)).collect();
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            sums.row_mut(c).scaled_add(1.0, &x.row(i));
            counts[c] += 1;
        }
        let mut moved = false;
        for c in 0..k {
            if counts[c] > 0 {
                let mean = sums.row(c).mapv(|v| v / counts[c] as f64);
                if mean != centroids.row(c) {
                    moved = true;
                }
                centroids.row_mut(c).assign(&mean);
            }
        }
        if !moved {
            break;
        }
    }
    Ok(centroids)
}

/// k-means over candidate embeddings with `k` = batch size; each centroid
/// contributes its nearest not-yet-selected candidate.
pub fn query_embedding_kmeans(req: &mut QueryRequest<'_>, iterations: usize) -> Result<QueryResult> {
    req.check_batch()?;
    let x = req.classifier.embed(req.features, &req.candidates)?;
    let centroids = kmeans(&x, req.k, iterations, req.rng)?;
    let mut taken = vec![false; x.nrows()];
    let mut positions = Vec::with_capacity(req.k);
    for centroid in centroids.axis_iter(Axis(0)) {
        let mut best: Option<(f64, usize)> = None;
        for i in (0..x.nrows()).filter(|&i| !taken[i]) {
            let d = squared_distance(x.row(i), centroid);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        let (_, i) = best.expect("k ≤ number of candidates");
        taken[i] = true;
        positions.push(i);
    }
    Ok(map_positions(&req.candidates, positions, None))
}
