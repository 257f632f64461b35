use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversarial::{DetectorLearner, FlipMode, ScaffoldDescription, DEFAULT_F1_TOLERANCE};
use crate::data::SyntheticConfig;
use crate::ensemble::SignPolicy;
use crate::error::{Error, Result};
use crate::explainers::{ExplainerTag, LimeConfig};
use crate::perturb::PerturbMode;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A complete experiment description, loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    pub data: DataSource,
    #[serde(default)]
    pub models: ModelSettings,
    #[serde(default)]
    pub explainers: ExplainerSettings,
    pub experiment: ExperimentKind,
}

fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticSettings),
    Csv { path: PathBuf, schema: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSettings {
    pub n_rows: usize,
    pub n_noise_features: usize,
    pub bias_strength: f64,
    pub n_uncorrelated: usize,
    pub noise_correlation: f64,
    pub noise_resolution: f64,
    pub quantized_noise: usize,
    /// Generator seed; derived from the master seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        let d = SyntheticConfig::default();
        Self {
            n_rows: d.n_rows,
            n_noise_features: d.n_noise_features,
            bias_strength: d.bias_strength,
            n_uncorrelated: d.n_uncorrelated,
            noise_correlation: d.noise_correlation,
            noise_resolution: d.noise_resolution,
            quantized_noise: d.quantized_noise,
            seed: None,
        }
    }
}

impl SyntheticSettings {
    pub fn to_config(&self, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            n_rows: self.n_rows,
            n_noise_features: self.n_noise_features,
            bias_strength: self.bias_strength,
            n_uncorrelated: self.n_uncorrelated,
            seed: self.seed.unwrap_or(seed),
            noise_correlation: self.noise_correlation,
            noise_resolution: self.noise_resolution,
            quantized_noise: self.quantized_noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    /// Feature the innocuous model predicts from; the first uncorrelated
    /// feature when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_feature: Option<String>,
    pub detector: DetectorSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSettings {
    pub learner: DetectorLearner,
    pub n_per_instance: usize,
    pub eval_per_instance: usize,
    pub holdout_fraction: f64,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        let d = crate::adversarial::OodTrainConfig::default();
        Self {
            learner: d.learner,
            n_per_instance: d.n_per_instance,
            eval_per_instance: d.eval_per_instance,
            holdout_fraction: d.holdout_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerSettings {
    pub lime: LimeSettings,
    pub shap: ShapSettings,
    pub shlime: ShlimeSettings,
}

pub type LimeSettings = LimeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapSettings {
    pub n_coalitions: usize,
    pub exact_threshold: usize,
    /// Reference rows sampled from the training split; 1 uses the
    /// training medoid.
    pub n_backgrounds: usize,
}

impl Default for ShapSettings {
    fn default() -> Self {
        Self {
            n_coalitions: 2048,
            exact_threshold: 12,
            n_backgrounds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShlimeSettings {
    pub sign_policy: String,
    /// Which detector the scaffold explained by SHLIME uses: "lime" or "shap".
    pub attack: String,
}

impl Default for ShlimeSettings {
    fn default() -> Self {
        Self {
            sign_policy: SignPolicy::default().to_string(),
            attack: "lime".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    Top3 {
        explainers: Vec<String>,
        #[serde(default = "default_n_explain")]
        n_explain: usize,
    },
    Sweep {
        explainers: Vec<String>,
        f1_targets: Vec<f64>,
        #[serde(default = "default_n_explain")]
        n_explain: usize,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
        #[serde(default)]
        flip_mode: FlipMode,
        #[serde(default)]
        plot: bool,
    },
    Pca {
        #[serde(default = "default_pca_mode")]
        mode: PerturbMode,
        #[serde(default = "default_pca_per_instance")]
        n_per_instance: usize,
        #[serde(default)]
        plot: bool,
    },
}

fn default_n_explain() -> usize {
    100
}

fn default_tolerance() -> f64 {
    DEFAULT_F1_TOLERANCE
}

fn default_pca_mode() -> PerturbMode {
    PerturbMode::Lime
}

fn default_pca_per_instance() -> usize {
    1
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Top3 { .. } => "top3",
            ExperimentKind::Sweep { .. } => "sweep",
            ExperimentKind::Pca { .. } => "pca",
        }
    }
}

fn parse_tags(field: &str, raw: &[String]) -> Result<Vec<ExplainerTag>> {
    if raw.is_empty() {
        return Err(Error::config(field, "at least one explainer is required"));
    }
    raw.iter()
        .enumerate()
        .map(|(i, s)| {
            s.parse::<ExplainerTag>()
                .map_err(|_| Error::config(format!("{field}[{i}]"), format!("unknown explainer `{s}`")))
        })
        .collect()
}

impl ExperimentConfig {
    /// Parses either a config file or a manifest emitted by a previous run
    /// (whose `[config]` table is the resolved config).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::config("<toml>", e.message()))?;
        let parsed: std::result::Result<Self, toml::de::Error> = match table.get("config") {
            Some(inner) if table.contains_key("artifact_version") => inner.clone().try_into(),
            _ => toml::Value::Table(table).try_into(),
        };
        let config = parsed.map_err(|e| Error::config("<toml>", e.message()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { field, message } if field == "<toml>" => {
                Error::config(path.display().to_string(), message)
            }
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Schema-independent checks.
    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("seed", "must be at most 2^63 - 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config("test_fraction", "must lie in (0, 1)"));
        }
        if let DataSource::Synthetic(s) = &self.data {
            if !(s.bias_strength > 0.5 && s.bias_strength <= 1.0) {
                return Err(Error::config("data.synthetic.bias_strength", "must lie in (0.5, 1]"));
            }
            if s.n_rows < 10 {
                return Err(Error::config("data.synthetic.n_rows", "must be at least 10"));
            }
            if s.n_uncorrelated == 0 {
                return Err(Error::config("data.synthetic.n_uncorrelated", "must be at least 1"));
            }
        }
        let d = &self.models.detector;
        if !(d.holdout_fraction > 0.0 && d.holdout_fraction < 1.0) {
            return Err(Error::config("models.detector.holdout_fraction", "must lie in (0, 1)"));
        }
        if d.n_per_instance == 0 || d.eval_per_instance == 0 {
            return Err(Error::config("models.detector", "perturbations per instance must be positive"));
        }
        let sh = &self.explainers.shap;
        if sh.n_backgrounds == 0 {
            return Err(Error::config("explainers.shap.n_backgrounds", "must be at least 1"));
        }
        if sh.exact_threshold > crate::explainers::EXACT_MAX_FEATURES {
            return Err(Error::config("explainers.shap.exact_threshold", "must be at most 20"));
        }
        self.sign_policy()?;
        self.shlime_attack()?;
        match &self.experiment {
            ExperimentKind::Top3 { n_explain, .. } | ExperimentKind::Sweep { n_explain, .. } if *n_explain == 0 => {
                return Err(Error::config("experiment.n_explain", "must be positive"));
            }
            ExperimentKind::Sweep { f1_targets, tolerance, .. } => {
                if f1_targets.is_empty() {
                    return Err(Error::config("experiment.f1_targets", "at least one target is required"));
                }
                if f1_targets.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::config("experiment.f1_targets", "targets must be strictly ascending"));
                }
                if let Some(t) = f1_targets.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
                    return Err(Error::config("experiment.f1_targets", format!("target {t} outside (0, 1]")));
                }
                if !(*tolerance > 0.0) {
                    return Err(Error::config("experiment.tolerance", "must be positive"));
                }
            }
            ExperimentKind::Pca { n_per_instance, .. } if *n_per_instance == 0 => {
                return Err(Error::config("experiment.n_per_instance", "must be positive"));
            }
            _ => {}
        }
        self.explainer_tags()?;
        Ok(())
    }

    pub fn explainer_tags(&self) -> Result<Vec<ExplainerTag>> {
        match &self.experiment {
            ExperimentKind::Top3 { explainers, .. } | ExperimentKind::Sweep { explainers, .. } => {
                parse_tags("experiment.explainers", explainers)
            }
            ExperimentKind::Pca { .. } => Ok(Vec::new()),
        }
    }

    pub fn sign_policy(&self) -> Result<SignPolicy> {
        self.explainers
            .shlime
            .sign_policy
            .parse()
            .map_err(|_| Error::config("explainers.shlime.sign_policy", format!(
                "unknown sign policy `{}`",
                self.explainers.shlime.sign_policy
            )))
    }

    pub fn shlime_attack(&self) -> Result<PerturbMode> {
        match self.explainers.shlime.attack.as_str() {
            "lime" => Ok(PerturbMode::Lime),
            "shap" => Ok(PerturbMode::Shap),
            other => Err(Error::config(
                "explainers.shlime.attack",
                format!("expected `lime` or `shap`, got `{other}`"),
            )),
        }
    }
}

/// Run record written before any result, and completed after the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact_version: String,
    pub status: String,
    pub experiment: String,
    pub started_unix: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<u64>,
    pub seeds: BTreeMap<String, u64>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scaffolds: Vec<ScaffoldDescription>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub achieved: Vec<AchievedF1>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cell_errors: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchievedF1 {
    pub f1_target: f64,
    pub explainer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_achieved: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flip_rate: Option<f64>,
    pub noise_seed: u64,
    pub explain_seed: u64,
}

impl Manifest {
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.message()))
    }
}
