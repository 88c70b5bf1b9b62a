use ndarray::{Array1, Array2, ArrayView2};

use super::{minibatches, softmax_in_place, TrainConfig};
use crate::error::{Error, Result};

/// Softmax regression on dense feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSoftmax {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseSoftmax {
    /// Trains on rows of `x` with class `targets[i] < n_classes`.
    pub fn fit(
        x: ArrayView2<f64>,
        targets: &[usize],
        n_classes: usize,
        config: &TrainConfig,
    ) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        if x.nrows() != targets.len() {
            return Err(Error::LengthMismatch(x.nrows(), targets.len()));
        }
        config.validate()?;
        let d = x.ncols();
        let mut model = Self {
            weights: Array2::zeros((n_classes, d)),
            bias: Array1::zeros(n_classes),
        };
        let lr = config.learning_rate;
        let shrink = 1.0 / (1.0 + lr * config.l2);
        let rows: Vec<usize> = (0..x.nrows()).collect();
        for epoch in minibatches(&rows, config) {
            for batch in epoch {
                let scale = 1.0 / batch.len() as f64;
                let mut grad_w = Array2::<f64>::zeros((n_classes, d));
                let mut grad_b = Array1::<f64>::zeros(n_classes);
                for &r in &batch {
                    let row = x.row(r);
                    let mut p = model.probs(row.to_vec());
                    p[targets[r]] -= 1.0;
                    for (c, &g) in p.iter().enumerate() {
                        grad_w.row_mut(c).scaled_add(g * scale, &row);
                        grad_b[c] += g * scale;
                    }
                }
                model.weights.scaled_add(-lr, &grad_w);
                model.weights.mapv_inplace(|w| w * shrink);
                model.bias.scaled_add(-lr, &grad_b);
            }
        }
        Ok(model)
    }

    fn probs(&self, x: Vec<f64>) -> Vec<f64> {
        let x = Array1::from(x);
        let mut z = (self.weights.dot(&x) + &self.bias).to_vec();
        softmax_in_place(&mut z);
        z
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t()) + &self.bias;
        for mut row in z.rows_mut() {
            let mut v = row.to_vec();
            softmax_in_place(&mut v);
            row.assign(&Array1::from(v));
        }
        z
    }
}
