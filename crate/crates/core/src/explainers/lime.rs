use serde::{Deserialize, Serialize};

use super::{AttributionVector, ExplainerTag};
use crate::data::{FeatureStats, StandardizationStats};
use crate::error::{Error, Result};
use crate::linalg::NormalEquations;
use crate::model::BlackBoxModel;
use crate::perturb::lime_perturb;

pub const DEFAULT_ZERO_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Exponential kernel width; `None` means `0.75 * sqrt(M)`.
    pub kernel_width: Option<f64>,
    /// Maximum number of non-zero weights; `None` means all `M`.
    pub max_features: Option<usize>,
    pub ridge: f64,
    /// Weights at most this fraction of the largest magnitude are reported
    /// as exactly zero (ridge spill-over and round-off).
    pub zero_tolerance: f64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            kernel_width: None,
            max_features: None,
            ridge: 1e-3,
            zero_tolerance: DEFAULT_ZERO_TOLERANCE,
        }
    }
}

impl LimeConfig {
    pub fn resolved_width(&self, m: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (m as f64).sqrt())
    }

    pub fn resolved_budget(&self, m: usize) -> usize {
        self.max_features.unwrap_or(m)
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let sigma = self.resolved_width(m);
        let k = self.resolved_budget(m);
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::explainer("lime", format!("kernel width must be > 0, got {sigma}")));
        }
        if k < 1 || k > m {
            return Err(Error::explainer("lime", format!("feature budget {k} outside 1..={m}")));
        }
        if self.ridge < 0.0 {
            return Err(Error::explainer("lime", "ridge strength must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.zero_tolerance) {
            return Err(Error::explainer("lime", "zero_tolerance must lie in [0, 1)"));
        }
        if self.n_samples < 2 {
            return Err(Error::explainer("lime", "n_samples must be >= 2"));
        }
        Ok(())
    }
}

/// `exp(-d^2 / sigma^2)`.
pub fn lime_kernel(distance: f64, sigma: f64) -> f64 {
    (-(distance * distance) / (sigma * sigma)).exp()
}

/// Interpretable representation: every feature z-scored, categorical codes
/// against the moments of their empirical frequency table.
fn interpretable(row: &[f64], stats: &StandardizationStats) -> Vec<f64> {
    row.iter()
        .zip(stats.features())
        .map(|(&v, fs)| match fs {
            FeatureStats::Continuous { mean, std } => (v - mean) / std,
            FeatureStats::Categorical { frequencies } => {
                let mean: f64 = frequencies.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
                let var: f64 = frequencies
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (k as f64 - mean).powi(2) * p)
                    .sum();
                let std = if var > 0.0 { var.sqrt() } else { 1.0 };
                (v - mean) / std
            }
        })
        .collect()
}

fn fit(
    z: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
    columns: &[usize],
    ridge: f64,
) -> Result<Vec<f64>> {
    let dim = columns.len() + 1;
    let mut ne = NormalEquations::new(dim);
    let mut x = vec![0.0; dim];
    x[0] = 1.0;
    for ((zi, &yi), &wi) in z.iter().zip(y).zip(w) {
        for (slot, &c) in x[1..].iter_mut().zip(columns) {
            *slot = zi[c];
        }
        ne.add(&x, yi, wi);
    }
    ne.add_ridge(ridge, &[0]);
    ne.solve(1e-13).ok_or_else(|| {
        Error::explainer(
            "lime",
            "weighted normal equations are singular; increase kernel_width or ridge",
        )
    })
}

/// Weighted ridge surrogate of the class-1 probability around `origin`,
/// restricted to the `max_features` largest-magnitude coefficients by
/// rank-then-refit.
pub fn explain_lime(
    model: &dyn BlackBoxModel,
    origin: &[f64],
    stats: &StandardizationStats,
    config: &LimeConfig,
    seed: u64,
) -> Result<AttributionVector> {
    let m = origin.len();
    config.validate(m)?;
    let sigma = config.resolved_width(m);
    let batch = lime_perturb(origin, stats, config.n_samples, seed)?;
    let z0 = interpretable(origin, stats);
    let mut z = Vec::with_capacity(batch.rows.len());
    let mut y = Vec::with_capacity(batch.rows.len());
    let mut w = Vec::with_capacity(batch.rows.len());
    for row in &batch.rows {
        let zi = interpretable(row, stats);
        let d = zi.iter().zip(&z0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        w.push(lime_kernel(d, sigma));
        y.push(model.positive_proba(row));
        z.push(zi);
    }
    let total: f64 = w.iter().sum();
    if total <= 1e-12 * w.len() as f64 {
        return Err(Error::explainer(
            "lime",
            format!("all kernel weights vanish at width {sigma}; use a larger kernel_width"),
        ));
    }
    let all: Vec<usize> = (0..m).collect();
    let beta = fit(&z, &y, &w, &all, config.ridge)?;
    let k = config.resolved_budget(m);
    let mut weights = vec![0.0; m];
    let intercept;
    if k == m {
        intercept = beta[0];
        weights.copy_from_slice(&beta[1..]);
    } else {
        let mut order = all.clone();
        order.sort_by(|&a, &b| beta[b + 1].abs().total_cmp(&beta[a + 1].abs()).then(a.cmp(&b)));
        let mut keep = order[..k].to_vec();
        keep.sort_unstable();
        let refit = fit(&z, &y, &w, &keep, config.ridge)?;
        intercept = refit[0];
        for (&c, &b) in keep.iter().zip(&refit[1..]) {
            weights[c] = b;
        }
    }
    let floor = config.zero_tolerance * weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    for w in &mut weights {
        if w.abs() <= floor {
            *w = 0.0;
        }
    }
    Ok(AttributionVector {
        intercept,
        weights,
        tag: ExplainerTag::Lime,
    })
}
