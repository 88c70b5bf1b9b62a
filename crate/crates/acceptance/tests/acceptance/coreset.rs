//! Greedy coreset against the brute-force max-min oracle.

use al_core::rng::Rng;
use al_core::strategies::greedy_coreset;
use ndarray::Array2;

use crate::oracles;
use crate::Outcome;

const INSTANCES: u64 = 200;

pub struct Instance {
    pub labeled: Vec<Vec<f64>>,
    pub unlabeled: Vec<Vec<f64>>,
    pub k: usize,
}

/// Random instance with `n ≤ 12` unlabeled points and `k ≤ 3`. Even seeds
/// use a small integer grid so distance ties are common.
pub fn instance(seed: u64) -> Instance {
    let mut rng = Rng::new(seed);
    let dim = 1 + rng.below(3);
    let n = 1 + rng.below(12);
    let n_lab = 1 + rng.below(4);
    let k = 1 + rng.below(3.min(n));
    let grid = seed % 2 == 0;
    let point = |rng: &mut Rng| -> Vec<f64> {
        (0..dim)
            .map(|_| {
                if grid {
                    rng.below(5) as f64
                } else {
                    rng.uniform(-3.0, 3.0)
                }
            })
            .collect()
    };
    let labeled = (0..n_lab).map(|_| point(&mut rng)).collect();
    let unlabeled = (0..n).map(|_| point(&mut rng)).collect();
    Instance { labeled, unlabeled, k }
}

pub fn matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let d = rows[0].len();
    Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i][j])
}

pub fn check(inst: &Instance) -> Result<(), String> {
    let got = greedy_coreset(&matrix(&inst.labeled), &matrix(&inst.unlabeled), inst.k)
        .map_err(|e| e.to_string())?;
    let want = oracles::greedy(&inst.labeled, &inst.unlabeled, inst.k);
    ensure!(got == want, "trace {got:?}, oracle {want:?}");
    Ok(())
}

pub fn criterion() -> Outcome {
    let mut mismatches = Vec::new();
    let mut ties = 0;
    for seed in 0..INSTANCES {
        let inst = instance(seed);
        if seed % 2 == 0 {
            ties += 1;
        }
        if let Err(e) = crate::guarded(|| check(&inst)) {
            mismatches.push(format!("instance {seed}: {e}"));
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        summary: format!(
            "{} mismatches over {INSTANCES} instances ({ties} on an integer grid)",
            mismatches.len()
        ),
        details: mismatches.into_iter().take(10).collect(),
    }
}
