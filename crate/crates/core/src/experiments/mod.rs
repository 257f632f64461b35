//! Top-3 occurrence, F1 sensitivity sweeps and PCA separability, plus
//! report emission and the config-driven pipeline.

mod config;
mod pca;
mod pipeline;
mod report;
mod sweep;
mod top3;

use rand::seq::index::sample;

pub use config::{
    DataSource, DetectorSettings, ExperimentConfig, ExperimentKind, ExplainerSettings, LimeSettings,
    ShapSettings, ShlimeSettings, SyntheticSettings, Manifest, ARTIFACT_VERSION,
};
pub use pca::{pca_separability, power_components, run_pca, PcaProjection, PrincipalComponents};
pub use pipeline::{run_config, RunOutcome};
pub use report::{emit_pca, emit_sweep, emit_top3, write_svg_sweep};
pub use sweep::{run_sensitivity_sweep, AttackSet, SweepCell, SweepResult};
pub use top3::{run_top3, Subject, Top3Cell, Top3Report};

use crate::data::{Dataset, StandardizationStats};
use crate::ensemble::{explain_shlime_basic, ShlimeConfig, SignPolicy};
use crate::error::{Error, Result};
use crate::explainers::{
    exact_shapley, explain_kernel_shap, explain_lime, AttributionRecord, AttributionVector,
    ExplainerTag, LimeConfig, ShapConfig,
};
use crate::model::BlackBoxModel;
use crate::seed;

/// Everything needed to run any explainer on a given model.
#[derive(Debug, Clone)]
pub struct ExplainerSuite {
    pub stats: StandardizationStats,
    pub lime: LimeConfig,
    pub shap: ShapConfig,
    pub sign_policy: SignPolicy,
}

impl ExplainerSuite {
    pub fn shlime(&self) -> ShlimeConfig {
        ShlimeConfig {
            lime: self.lime.clone(),
            shap: self.shap.clone(),
            sign_policy: self.sign_policy,
        }
    }

    pub fn explain(
        &self,
        tag: ExplainerTag,
        model: &dyn BlackBoxModel,
        origin: &[f64],
        seed_: u64,
    ) -> Result<AttributionVector> {
        match tag {
            ExplainerTag::Lime => explain_lime(model, origin, &self.stats, &self.lime, seed_),
            ExplainerTag::Shap => explain_kernel_shap(model, origin, &self.shap, seed_),
            ExplainerTag::Shlime => explain_shlime_basic(model, origin, &self.stats, &self.shlime(), seed_),
            ExplainerTag::Exact => {
                let n = self.shap.backgrounds.len() as f64;
                let mut acc: Option<AttributionVector> = None;
                for b in &self.shap.backgrounds {
                    let a = exact_shapley(model, origin, b)?;
                    match acc.as_mut() {
                        None => {
                            acc = Some(AttributionVector {
                                intercept: a.intercept / n,
                                weights: a.weights.iter().map(|w| w / n).collect(),
                                tag: ExplainerTag::Exact,
                            })
                        }
                        Some(t) => {
                            t.intercept += a.intercept / n;
                            for (x, w) in t.weights.iter_mut().zip(&a.weights) {
                                *x += w / n;
                            }
                        }
                    }
                }
                acc.ok_or_else(|| Error::explainer("exact", "no background row"))
            }
        }
    }

    /// Sign policy recorded alongside SHLIME attributions.
    pub fn policy_for(&self, tag: ExplainerTag) -> Option<String> {
        (tag == ExplainerTag::Shlime).then(|| self.sign_policy.to_string())
    }
}

/// `n` distinct row indices of `data`, sorted, chosen uniformly by `seed`.
pub fn sample_instances(data: &Dataset, n: usize, seed_: u64) -> Result<Vec<usize>> {
    if n == 0 || n > data.n_rows() {
        return Err(Error::Experiment(format!(
            "n_explain must be in 1..={}, got {n}",
            data.n_rows()
        )));
    }
    let mut idx = sample(&mut seed::rng(seed_), data.n_rows(), n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Attributions for one (model, explainer) cell, one per instance.
pub(crate) fn explain_instances(
    suite: &ExplainerSuite,
    tag: ExplainerTag,
    model: &dyn BlackBoxModel,
    data: &Dataset,
    instances: &[usize],
    cell_seed: u64,
    id_prefix: &str,
) -> Result<Vec<AttributionRecord>> {
    instances
        .iter()
        .map(|&i| {
            let attribution = suite.explain(tag, model, data.row(i), seed::derive(cell_seed, i as u64))?;
            Ok(AttributionRecord {
                instance_id: format!("{id_prefix}{i}"),
                attribution,
                sign_policy: suite.policy_for(tag),
            })
        })
        .collect()
}

/// Stable seed for a named cell, below 2^63 like `seed::derive`.
pub(crate) fn cell_seed(seed_: u64, parts: &[&str]) -> u64 {
    let mut h = seed_;
    for p in parts {
        for b in p.bytes() {
            h = seed::splitmix64(h ^ b as u64);
        }
        h = seed::splitmix64(h ^ 0xFF);
    }
    h >> 1
}
