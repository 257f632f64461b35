use serde::{Deserialize, Serialize};

use super::{AttributionVector, ExplainerTag};
use crate::error::{Error, Result};
use crate::linalg::NormalEquations;
use crate::model::BlackBoxModel;
use crate::perturb::{sample_mask, CoalitionMask};
use crate::seed;

/// Hard limit on exhaustive coalition enumeration.
pub const MAX_EXACT_THRESHOLD: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapConfig {
    /// Sampled coalitions when enumeration is not used.
    pub n_coalitions: usize,
    /// Enumerate all coalitions when the number of varying features is at
    /// most this.
    pub exact_threshold: usize,
    /// Reference rows standing in for absent features. One row is the
    /// plain single-reference estimator; several rows average the
    /// single-reference attributions.
    pub backgrounds: Vec<Vec<f64>>,
}

impl ShapConfig {
    pub fn single(background: Vec<f64>) -> Self {
        Self {
            n_coalitions: 2048,
            exact_threshold: 12,
            backgrounds: vec![background],
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if m < 2 {
            return Err(Error::explainer("shap", format!("need at least 2 features, got {m}")));
        }
        if self.exact_threshold > MAX_EXACT_THRESHOLD {
            return Err(Error::explainer(
                "shap",
                format!("exact_threshold {} exceeds {MAX_EXACT_THRESHOLD}", self.exact_threshold),
            ));
        }
        if self.n_coalitions < 2 * m {
            return Err(Error::explainer(
                "shap",
                format!("n_coalitions must be >= 2M = {}, got {}", 2 * m, self.n_coalitions),
            ));
        }
        if self.backgrounds.is_empty() {
            return Err(Error::explainer("shap", "no background row"));
        }
        if let Some(b) = self.backgrounds.iter().find(|b| b.len() != m) {
            return Err(Error::explainer(
                "shap",
                format!("background width {} does not match {m}", b.len()),
            ));
        }
        Ok(())
    }
}

/// Shapley kernel weight of a coalition; the empty and full coalitions get
/// infinite weight and must be handled as constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelWeight {
    Finite(f64),
    Infinite,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `(M - 1) / (C(M, s) * s * (M - s))`, evaluated as a ratio of exact
/// integers.
pub fn shapley_kernel_weight(m: usize, s: usize) -> Result<KernelWeight> {
    if m < 2 || s > m {
        return Err(Error::explainer(
            "shap",
            format!("coalition size {s} invalid for {m} features"),
        ));
    }
    if s == 0 || s == m {
        return Ok(KernelWeight::Infinite);
    }
    let den = binomial(m, s) * (s * (m - s)) as u128;
    Ok(KernelWeight::Finite((m - 1) as f64 / den as f64))
}

/// Attribution for one background row. Features equal in origin and
/// background get exactly zero and are left out of the regression.
fn explain_single(
    model: &dyn BlackBoxModel,
    origin: &[f64],
    background: &[f64],
    config: &ShapConfig,
    seed_: u64,
) -> Result<(f64, Vec<f64>)> {
    let m = origin.len();
    let f_origin = model.positive_proba(origin);
    let base = model.positive_proba(background);
    let delta = f_origin - base;
    let varying: Vec<usize> = (0..m).filter(|&j| origin[j] != background[j]).collect();
    let mut phi = vec![0.0; m];
    match varying.len() {
        0 => return Ok((base, phi)),
        1 => {
            phi[varying[0]] = delta;
            return Ok((base, phi));
        }
        _ => {}
    }
    let mv = varying.len();

    // (mask over varying features, regression weight)
    let coalitions: Vec<(CoalitionMask, f64)> = if mv <= config.exact_threshold {
        let mut out = Vec::with_capacity((1usize << mv) - 2);
        for bits in 1..((1u64 << mv) - 1) {
            let mask: Vec<bool> = (0..mv).map(|j| bits >> j & 1 == 1).collect();
            let s = bits.count_ones() as usize;
            let KernelWeight::Finite(w) = shapley_kernel_weight(mv, s)? else {
                unreachable!("proper coalition")
            };
            out.push((CoalitionMask::new(mask), w));
        }
        out
    } else {
        // Sizes are drawn uniformly, then uniformly within a size, so a mask
        // of size s has probability 1 / ((M-1) C(M,s)). Reweighting by
        // kernel / probability gives weights proportional to 1 / (s (M-s)).
        let mut rng = seed::rng(seed_);
        (0..config.n_coalitions)
            .map(|_| {
                let z = sample_mask(mv, &mut rng);
                let s = z.size();
                let w = 1.0 / (s * (mv - s)) as f64;
                (z, w)
            })
            .collect()
    };

    // Eliminate the last varying feature with the local-accuracy
    // constraint sum(phi) = delta.
    let dim = mv - 1;
    let mut ne = NormalEquations::new(dim);
    let mut row = background.to_vec();
    let mut x = vec![0.0; dim];
    let mut distinct = std::collections::HashSet::new();
    for (z, w) in &coalitions {
        for (k, &j) in varying.iter().enumerate() {
            row[j] = if z.bits()[k] { origin[j] } else { background[j] };
        }
        let y = model.positive_proba(&row) - base;
        let last = z.bits()[dim] as u8 as f64;
        for (k, slot) in x.iter_mut().enumerate() {
            *slot = z.bits()[k] as u8 as f64 - last;
        }
        ne.add(&x, y - last * delta, *w);
        distinct.insert(z.clone());
    }
    let solved = ne.solve(1e-12).ok_or_else(|| {
        Error::explainer(
            "shap",
            format!(
                "coalition design is rank-deficient ({} distinct coalitions for {mv} varying \
                 features); use n_coalitions >= {}",
                distinct.len(),
                (4 * mv).max(2 * config.n_coalitions)
            ),
        )
    })?;
    let mut sum = 0.0;
    for (k, &j) in varying[..dim].iter().enumerate() {
        phi[j] = solved[k];
        sum += solved[k];
    }
    phi[varying[dim]] = delta - sum;
    Ok((base, phi))
}

/// Kernel SHAP: Shapley-kernel weighted least squares over coalitions,
/// with `phi0 = f(background)` and `phi0 + sum(phi) = f(origin)` imposed
/// exactly. With several background rows the per-row attributions are
/// averaged, which is the attribution for the averaged value function.
pub fn explain_kernel_shap(
    model: &dyn BlackBoxModel,
    origin: &[f64],
    config: &ShapConfig,
    seed_: u64,
) -> Result<AttributionVector> {
    let m = origin.len();
    config.validate(m)?;
    let n_bg = config.backgrounds.len() as f64;
    let mut intercept = 0.0;
    let mut weights = vec![0.0; m];
    for (b, background) in config.backgrounds.iter().enumerate() {
        let (base, phi) = explain_single(model, origin, background, config, seed::derive(seed_, b as u64))?;
        intercept += base / n_bg;
        for (acc, p) in weights.iter_mut().zip(phi) {
            *acc += p / n_bg;
        }
    }
    Ok(AttributionVector {
        intercept,
        weights,
        tag: ExplainerTag::Shap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainers::exact_shapley;
    use crate::model::FnModel;

    #[test]
    fn kernel_weights_by_hand() {
        assert_eq!(shapley_kernel_weight(4, 1).unwrap(), KernelWeight::Finite(0.25));
        assert_eq!(shapley_kernel_weight(4, 2).unwrap(), KernelWeight::Finite(0.125));
        assert_eq!(shapley_kernel_weight(4, 3).unwrap(), KernelWeight::Finite(0.25));
        assert_eq!(shapley_kernel_weight(4, 0).unwrap(), KernelWeight::Infinite);
        assert_eq!(shapley_kernel_weight(4, 4).unwrap(), KernelWeight::Infinite);
        assert!(shapley_kernel_weight(4, 5).is_err());
    }

    #[test]
    fn origin_equal_to_background_gives_zero() {
        let m = FnModel(|r: &[f64]| 0.2 + 0.1 * r[0] + 0.05 * r[2]);
        let o = vec![1.0, 2.0, 3.0];
        let a = explain_kernel_shap(&m, &o, &ShapConfig::single(o.clone()), 0).unwrap();
        assert!(a.weights.iter().all(|&w| w == 0.0));
        assert_eq!(a.intercept, m.positive_proba(&o));
    }

    #[test]
    fn linear_model_closed_form() {
        let w = [0.1, -0.05, 0.2, 0.03, -0.07];
        let m = FnModel(move |r: &[f64]| 0.4 + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>());
        let o = vec![0.5, 1.0, -0.3, 0.9, 0.2];
        let b = vec![0.1, -0.4, 0.3, 0.0, 0.6];
        let a = explain_kernel_shap(&m, &o, &ShapConfig::single(b.clone()), 0).unwrap();
        for j in 0..5 {
            assert!((a.weights[j] - w[j] * (o[j] - b[j])).abs() < 1e-9);
        }
    }

    #[test]
    fn sampled_mode_approaches_exact() {
        // three-way interaction, 14 features, sampling forced
        let m = FnModel(|r: &[f64]| {
            let s: f64 = r.iter().sum();
            (0.3 + 0.02 * s + 0.1 * (r[0] * r[1] * r[2])).clamp(0.0, 1.0)
        });
        let o: Vec<f64> = (0..14).map(|j| 1.0 + 0.1 * j as f64).collect();
        let b = vec![0.0; 14];
        let exact = exact_shapley(&m, &o, &b).unwrap();
        let cfg = ShapConfig {
            n_coalitions: 20_000,
            exact_threshold: 4,
            backgrounds: vec![b],
        };
        let est = explain_kernel_shap(&m, &o, &cfg, 3).unwrap();
        let err = est
            .weights
            .iter()
            .zip(&exact.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.01, "{err}");
        assert!((est.full_coalition_value() - m.positive_proba(&o)).abs() < 1e-12);
    }

    #[test]
    fn too_few_coalitions_is_rejected() {
        let m = FnModel(|r: &[f64]| r[0]);
        let cfg = ShapConfig {
            n_coalitions: 3,
            exact_threshold: 0,
            backgrounds: vec![vec![0.0; 4]],
        };
        assert!(explain_kernel_shap(&m, &[1.0; 4], &cfg, 1).is_err());
    }

    #[test]
    fn averaged_backgrounds_preserve_local_accuracy() {
        let m = FnModel(|r: &[f64]| (0.5 + 0.2 * r[0] - 0.1 * r[1] * r[2]).clamp(0.0, 1.0));
        let o = vec![0.7, 0.2, 0.9];
        let cfg = ShapConfig {
            backgrounds: vec![vec![0.0, 0.0, 0.0], vec![0.5, 1.0, 0.1], vec![0.7, 0.3, 0.3]],
            ..ShapConfig::single(vec![])
        };
        let a = explain_kernel_shap(&m, &o, &cfg, 1).unwrap();
        assert!((a.full_coalition_value() - m.positive_proba(&o)).abs() < 1e-12);
    }
}
