use ndarray::{Array2, Axis};

use super::squared_distance;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Greedy k-center selection.
///
/// Repeats `k` times: pick the unlabeled row whose distance to the nearest
/// labeled-or-already-picked row is largest, ties to the lower position.
/// Returns positions into `unlabeled`.
pub fn greedy_coreset(labeled: &Array2<f64>, unlabeled: &Array2<f64>, k: usize) -> Result<Vec<usize>> {
    let n = unlabeled.nrows();
    if k > n {
        return Err(Error::BatchTooLarge { k, available: n });
    }
    if labeled.nrows() == 0 {
        return Err(Error::NoLabeled);
    }
    let mut min_dist: Vec<f64> = (0..n)
        .map(|i| {
            labeled
                .axis_iter(Axis(0))
                .map(|l| squared_distance(unlabeled.row(i), l))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut taken = vec![false; n];
    let mut selected = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            if best.is_none_or(|b| min_dist[i] > min_dist[b]) {
                best = Some(i);
            }
        }
        let pick = best.expect("k ≤ n");
        taken[pick] = true;
        selected.push(pick);
        for i in 0..n {
            min_dist[i] = min_dist[i].min(squared_distance(unlabeled.row(i), unlabeled.row(pick)));
        }
    }
    Ok(selected)
}

/// Lightweight-coreset sampling distribution
/// `q(x) = 1/(2n) + d(x, μ)² / (2 Σ d(x', μ)²)`, uniform when every row sits
/// on the mean.
pub fn lightweight_distribution(x: &Array2<f64>) -> Vec<f64> {
    let n = x.nrows();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let d2: Vec<f64> = x
        .axis_iter(Axis(0))
        .map(|row| squared_distance(row, mean.view()))
        .collect();
    let total: f64 = d2.iter().sum();
    let uniform = 1.0 / n as f64;
    if total <= 0.0 {
        return vec![uniform; n];
    }
    d2.iter().map(|d| 0.5 * uniform + 0.5 * d / total).collect()
}

/// Samples `k` distinct rows without replacement proportional to the
/// lightweight-coreset distribution, renormalizing after each draw.
pub fn lightweight_coreset(x: &Array2<f64>, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let n = x.nrows();
    if k > n {
        return Err(Error::BatchTooLarge { k, available: n });
    }
    let mut q = lightweight_distribution(x);
    let mut selected = Vec::with_capacity(k);
    for _ in 0..k {
        let pick = rng.weighted_index(&q).expect("positive mass remains while k ≤ n");
        q[pick] = 0.0;
        selected.push(pick);
    }
    Ok(selected)
}
