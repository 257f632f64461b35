use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::BlackBoxModel;

/// Binary metrics with class 1 as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Undefined ratios (no predicted or no actual positives) are reported as 0.
pub fn metrics_from_predictions(predictions: &[u8], labels: &[u8]) -> Result<ClassificationMetrics> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(Error::Model(format!(
            "need equal non-empty prediction/label vectors, got {} and {}",
            predictions.len(),
            labels.len()
        )));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fn_ += 1,
            _ => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ClassificationMetrics {
        accuracy: ratio(tp + tn, predictions.len()),
        precision,
        recall,
        f1,
    })
}

pub fn evaluate(model: &dyn BlackBoxModel, dataset: &Dataset) -> Result<ClassificationMetrics> {
    let preds: Vec<u8> = dataset.rows().map(|r| model.predict(r)).collect();
    metrics_from_predictions(&preds, dataset.labels())
}
