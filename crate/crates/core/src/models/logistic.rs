use serde::{Deserialize, Serialize};

use super::check_trainable;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::BlackBoxModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

/// `sigmoid(w · z + b)` where `z` is the row z-scored with the training
/// means and scales captured at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub hyper: LogisticHyper,
    /// Regularized mean log-loss before each epoch and after the last.
    pub loss_history: Vec<f64>,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    fn logit(&self, row: &[f64]) -> f64 {
        self.bias
            + row
                .iter()
                .zip(&self.weights)
                .zip(self.means.iter().zip(&self.scales))
                .map(|((x, w), (m, s))| w * (x - m) / s)
                .sum::<f64>()
    }
}

impl BlackBoxModel for LogisticModel {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let p = sigmoid(self.logit(row));
        [1.0 - p, p]
    }
}

fn loss(z: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = z.len() as f64;
    let data: f64 = z
        .iter()
        .zip(y)
        .map(|(r, &yi)| {
            let t = b + r.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            // log(1 + e^t) - y t, computed stably
            let softplus = if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
            softplus - yi * t
        })
        .sum();
    data / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Full-batch gradient descent on the L2-regularized log-loss over
/// z-scored inputs. Deterministic: weights start at zero.
pub fn train_logistic(train: &Dataset, hyper: &LogisticHyper) -> Result<LogisticModel> {
    check_trainable(train)?;
    if !(hyper.learning_rate > 0.0) || hyper.l2 < 0.0 {
        return Err(Error::Model(format!(
            "invalid logistic hyperparameters: {hyper:?}"
        )));
    }
    let n = train.n_rows();
    let width = train.width();
    let mut means = vec![0.0; width];
    let mut scales = vec![1.0; width];
    for j in 0..width {
        let col = train.column(j);
        let m = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        means[j] = m;
        scales[j] = if sd > 1e-12 { sd } else { 1.0 };
    }
    let z: Vec<Vec<f64>> = train
        .rows()
        .map(|r| (0..width).map(|j| (r[j] - means[j]) / scales[j]).collect())
        .collect();
    let y: Vec<f64> = train.labels().iter().map(|&l| l as f64).collect();

    let mut w = vec![0.0; width];
    let mut b = 0.0;
    let mut loss_history = Vec::with_capacity(hyper.epochs + 1);
    loss_history.push(loss(&z, &y, &w, b, hyper.l2));
    let mut grad_w = vec![0.0; width];
    for _ in 0..hyper.epochs {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (r, &yi) in z.iter().zip(&y) {
            let t = b + r.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let err = sigmoid(t) - yi;
            grad_b += err;
            for (g, a) in grad_w.iter_mut().zip(r) {
                *g += err * a;
            }
        }
        for (wj, g) in w.iter_mut().zip(&grad_w) {
            *wj -= hyper.learning_rate * (g / n as f64 + hyper.l2 * *wj);
        }
        b -= hyper.learning_rate * grad_b / n as f64;
        loss_history.push(loss(&z, &y, &w, b, hyper.l2));
    }
    Ok(LogisticModel {
        weights: w,
        bias: b,
        means,
        scales,
        hyper: hyper.clone(),
        loss_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, FeatureSchema, SyntheticConfig};
    use crate::models::evaluate;
    use std::sync::Arc;

    fn and_data() -> Dataset {
        let schema = Arc::new(crate::data::synthetic_schema(2, 0).unwrap());
        // two continuous columns + sensitive column held at 0
        let rows = vec![
            vec![0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
        ];
        Dataset::from_rows(schema, &rows, vec![0, 0, 0, 1]).unwrap()
    }

    #[test]
    fn separable_and_is_fit_perfectly() {
        let d = and_data();
        let m = train_logistic(
            &d,
            &LogisticHyper {
                learning_rate: 0.5,
                epochs: 5000,
                l2: 0.0,
            },
        )
        .unwrap();
        assert_eq!(evaluate(&m, &d).unwrap().accuracy, 1.0);
    }

    #[test]
    fn zero_epochs_predicts_sigmoid_of_bias() {
        let d = and_data();
        let m = train_logistic(
            &d,
            &LogisticHyper {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        for r in d.rows() {
            assert_eq!(m.positive_proba(r), sigmoid(m.bias));
        }
        assert_eq!(m.bias, 0.0);
    }

    #[test]
    fn loss_never_increases_for_small_steps() {
        let d = generate_synthetic(&SyntheticConfig {
            n_rows: 300,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        let m = train_logistic(
            &d,
            &LogisticHyper {
                learning_rate: 0.1,
                epochs: 200,
                l2: 1e-3,
            },
        )
        .unwrap();
        for pair in m.loss_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "{pair:?}");
        }
    }

    #[test]
    fn deterministic_weights() {
        let d = and_data();
        let h = LogisticHyper::default();
        assert_eq!(train_logistic(&d, &h).unwrap(), train_logistic(&d, &h).unwrap());
    }

    #[test]
    fn single_class_is_rejected() {
        let schema: Arc<FeatureSchema> = Arc::new(crate::data::synthetic_schema(1, 0).unwrap());
        let d = Dataset::from_rows(schema, &[vec![0.0, 0.0], vec![1.0, 1.0]], vec![1, 1]).unwrap();
        assert!(train_logistic(&d, &LogisticHyper::default()).is_err());
    }
}
