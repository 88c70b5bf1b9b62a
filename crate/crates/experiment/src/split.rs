//! Seeded stratified sampling for test splits and seed sets.
//!
//! Rows are stratified by their smallest class index (the only class in
//! single-label mode); multi-label rows with an empty set form their own
//! stratum.

use std::collections::BTreeMap;

use al_core::corpus::LabelSet;
use al_core::Rng;

use crate::error::{ExperimentError, Result};

fn strata(indices: &[usize], labels: &[LabelSet]) -> BTreeMap<Option<usize>, Vec<usize>> {
    let mut out: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
    for &i in indices {
        out.entry(labels[i].primary()).or_default().push(i);
    }
    out
}

/// Splits `0..labels.len()` into `(pool, test)`, taking `round(fraction·n_c)`
/// rows of every stratum into the test split. Both lists are ascending.
pub fn stratified_split(labels: &[LabelSet], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let all: Vec<usize> = (0..labels.len()).collect();
    let mut rng = Rng::new(seed);
    let mut pool = Vec::new();
    let mut test = Vec::new();
    for (_, mut rows) in strata(&all, labels) {
        rng.shuffle(&mut rows);
        let n_test = (fraction * rows.len() as f64).round() as usize;
        test.extend_from_slice(&rows[..n_test]);
        pool.extend_from_slice(&rows[n_test..]);
    }
    if pool.is_empty() || test.is_empty() {
        return Err(ExperimentError::Split(format!(
            "test fraction {fraction} leaves {} pool and {} test rows",
            pool.len(),
            test.len()
        )));
    }
    pool.sort_unstable();
    test.sort_unstable();
    Ok((pool, test))
}

/// Draws `size` rows of `pool` round-robin over strata (in class order) so
/// every class is represented once the seed set is at least as large as the
/// number of classes. Returned in draw order.
pub fn stratified_seed_set(pool: &[usize], labels: &[LabelSet], size: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if size >= pool.len() {
        return Err(ExperimentError::Config(format!(
            "seed_size {size} must be smaller than the pool ({} rows)",
            pool.len()
        )));
    }
    let mut groups: Vec<Vec<usize>> = strata(pool, labels).into_values().collect();
    for g in &mut groups {
        rng.shuffle(g);
        g.reverse(); // pop from the back in shuffled order
    }
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        for g in groups.iter_mut() {
            if out.len() == size {
                break;
            }
            if let Some(i) = g.pop() {
                out.push(i);
            }
        }
    }
    Ok(out)
}
