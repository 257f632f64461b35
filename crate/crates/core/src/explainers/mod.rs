//! Additive feature attributions: LIME, Kernel SHAP, the brute-force
//! Shapley oracle, ranking, and per-instance CSV export.

mod exact;
mod kernel_shap;
mod lime;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use exact::{exact_shapley, EXACT_MAX_FEATURES};
pub use kernel_shap::{explain_kernel_shap, shapley_kernel_weight, KernelWeight, ShapConfig};
pub use lime::{explain_lime, lime_kernel, LimeConfig, DEFAULT_ZERO_TOLERANCE};

use crate::data::FeatureSchema;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainerTag {
    Lime,
    Shap,
    Shlime,
    Exact,
}

impl ExplainerTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ExplainerTag::Lime => "lime",
            ExplainerTag::Shap => "shap",
            ExplainerTag::Shlime => "shlime",
            ExplainerTag::Exact => "exact",
        }
    }
}

impl fmt::Display for ExplainerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExplainerTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lime" => Ok(Self::Lime),
            "shap" => Ok(Self::Shap),
            "shlime" => Ok(Self::Shlime),
            "exact" => Ok(Self::Exact),
            other => Err(Error::config("explainer", format!("unknown explainer tag `{other}`"))),
        }
    }
}

/// `g(z') = intercept + sum_i weights[i] * z'_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub tag: ExplainerTag,
}

impl AttributionVector {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `intercept + sum(weights)`: the surrogate's value with every feature present.
    pub fn full_coalition_value(&self) -> f64 {
        self.intercept + self.weights.iter().sum::<f64>()
    }
}

/// Feature indices by descending `|phi|`, ties by ascending index.
pub fn rank_features(attr: &AttributionVector) -> Vec<usize> {
    let mut order: Vec<usize> = (0..attr.weights.len()).collect();
    order.sort_by(|&a, &b| {
        attr.weights[b]
            .abs()
            .total_cmp(&attr.weights[a].abs())
            .then(a.cmp(&b))
    });
    order
}

/// One explained instance for CSV export.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionRecord {
    pub instance_id: String,
    pub attribution: AttributionVector,
    /// Filled for SHLIME rows only.
    pub sign_policy: Option<String>,
}

/// Header `instance_id,explainer,sign_policy,phi0,<feature names...>`.
pub fn write_attributions_csv<W: Write>(
    out: W,
    schema: &FeatureSchema,
    records: &[AttributionRecord],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["instance_id", "explainer", "sign_policy", "phi0"];
    header.extend(schema.feature_names());
    let io = |e: csv::Error| Error::Experiment(format!("attribution csv: {e}"));
    w.write_record(&header).map_err(io)?;
    for r in records {
        if r.attribution.len() != schema.width() {
            return Err(Error::Experiment(format!(
                "attribution for `{}` has {} weights, schema has {}",
                r.instance_id,
                r.attribution.len(),
                schema.width()
            )));
        }
        let mut row = vec![
            r.instance_id.clone(),
            r.attribution.tag.to_string(),
            r.sign_policy.clone().unwrap_or_default(),
            format!("{}", r.attribution.intercept),
        ];
        row.extend(r.attribution.weights.iter().map(|v| format!("{v}")));
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Experiment(format!("attribution csv: {e}")))
}

pub fn save_attributions_csv(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
    records: &[AttributionRecord],
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_attributions_csv(std::io::BufWriter::new(file), schema, records)
}
