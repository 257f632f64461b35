//! SHLIME: per-feature product of a LIME and a Kernel SHAP explanation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::StandardizationStats;
use crate::error::{Error, Result};
use crate::explainers::{
    explain_kernel_shap, explain_lime, AttributionVector, ExplainerTag, LimeConfig, ShapConfig,
};
use crate::model::BlackBoxModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPolicy {
    /// `lime * shap`.
    #[default]
    SignedProduct,
    /// `sign(lime) * |lime| * |shap|`.
    LimeSignShapMagnitude,
}

impl SignPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            SignPolicy::SignedProduct => "signed_product",
            SignPolicy::LimeSignShapMagnitude => "lime_sign_shap_magnitude",
        }
    }

    pub fn combine(self, lime: f64, shap: f64) -> f64 {
        match self {
            SignPolicy::SignedProduct => lime * shap,
            SignPolicy::LimeSignShapMagnitude => lime * shap.abs(),
        }
    }
}

impl fmt::Display for SignPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed_product" => Ok(SignPolicy::SignedProduct),
            "lime_sign_shap_magnitude" => Ok(SignPolicy::LimeSignShapMagnitude),
            other => Err(Error::config("sign_policy", format!("unknown sign policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShlimeConfig {
    pub lime: LimeConfig,
    pub shap: ShapConfig,
    pub sign_policy: SignPolicy,
}

impl ShlimeConfig {
    pub fn validate(&self, m: usize) -> Result<()> {
        self.lime.validate(m)?;
        self.shap.validate(m)
    }
}

/// Combines two attribution vectors feature by feature. The intercept is
/// taken from `shap`.
pub fn combine(lime: &AttributionVector, shap: &AttributionVector, policy: SignPolicy) -> Result<AttributionVector> {
    if lime.len() != shap.len() {
        return Err(Error::explainer(
            "shlime",
            format!("lime has {} weights, shap has {}", lime.len(), shap.len()),
        ));
    }
    Ok(AttributionVector {
        intercept: shap.intercept,
        weights: lime
            .weights
            .iter()
            .zip(&shap.weights)
            .map(|(&a, &b)| policy.combine(a, b))
            .collect(),
        tag: ExplainerTag::Shlime,
    })
}

/// LIME with `seed` and Kernel SHAP with `seed + 1`, run concurrently,
/// then combined with the configured sign policy.
pub fn explain_shlime_basic(
    model: &dyn BlackBoxModel,
    origin: &[f64],
    stats: &StandardizationStats,
    config: &ShlimeConfig,
    seed: u64,
) -> Result<AttributionVector> {
    let (lime, shap) = rayon::join(
        || explain_lime(model, origin, stats, &config.lime, seed),
        || explain_kernel_shap(model, origin, &config.shap, seed.wrapping_add(1)),
    );
    let lime = lime.map_err(|e| Error::explainer("shlime", format!("lime sub-explanation failed: {e}")))?;
    let shap = shap.map_err(|e| Error::explainer("shlime", format!("shap sub-explanation failed: {e}")))?;
    combine(&lime, &shap, config.sign_policy)
}
