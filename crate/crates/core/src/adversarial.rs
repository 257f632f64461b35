//! Scaffolding attack: an OOD detector that tells real rows from explainer
//! perturbations, and a classifier that routes real rows to the biased
//! model and everything else to an innocuous one.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{split, Dataset};
use crate::error::{Error, Result};
use crate::model::{BlackBoxModel, SharedModel};
use crate::models::{
    metrics_from_predictions, train_forest, train_logistic, ForestHyper, LogisticHyper, Model,
};
use crate::perturb::{build_ood_training_set_with_backgrounds, PerturbMode};
use crate::seed;

pub const OOD_THRESHOLD: f64 = 0.5;
pub const DEFAULT_F1_TOLERANCE: f64 = 0.02;
const MAX_BISECTION_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DetectorLearner {
    Forest(ForestHyper),
    Logistic(LogisticHyper),
}

impl DetectorLearner {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorLearner::Forest(_) => "forest",
            DetectorLearner::Logistic(_) => "logistic",
        }
    }
}

/// Split candidates per node for the default detector; clamped to the row
/// width, so every feature is tried.
pub const DETECTOR_MAX_FEATURES: usize = 1024;

impl Default for DetectorLearner {
    fn default() -> Self {
        DetectorLearner::Forest(ForestHyper {
            n_trees: 100,
            max_depth: 30,
            max_features: Some(DETECTOR_MAX_FEATURES),
            ..ForestHyper::default()
        })
    }
}

/// Which thresholded decisions the flip noise may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipMode {
    /// Only OOD decisions are flipped to in-distribution. Real rows are
    /// never rerouted, so fidelity is unaffected by degradation.
    #[default]
    MissOnly,
    /// Either decision is flipped.
    Symmetric,
}

impl FlipMode {
    fn max_rate(self) -> f64 {
        match self {
            FlipMode::MissOnly => 1.0,
            FlipMode::Symmetric => 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OodTrainConfig {
    pub learner: DetectorLearner,
    /// Perturbations per real row in the training set.
    pub n_per_instance: usize,
    /// Perturbations per real row in the held-out evaluation set.
    pub eval_per_instance: usize,
    /// Fraction of real rows held out for measuring F1.
    pub holdout_fraction: f64,
    /// Reference rows for SHAP-mode perturbations; `None` draws a random
    /// real row per instance.
    pub shap_backgrounds: Option<Vec<Vec<f64>>>,
}

impl Default for OodTrainConfig {
    fn default() -> Self {
        Self {
            learner: DetectorLearner::default(),
            n_per_instance: 3,
            eval_per_instance: 1,
            holdout_fraction: 0.2,
            shap_backgrounds: None,
        }
    }
}

/// Thresholded OOD classifier with optional per-row decision noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodDetector {
    pub model: Model,
    pub mode: PerturbMode,
    pub threshold: f64,
    pub flip_rate: f64,
    pub flip_mode: FlipMode,
    pub noise_seed: u64,
    /// F1 of the noiseless detector on its held-out evaluation set.
    pub heldout_f1: f64,
    /// F1 of this detector (noise included) on the evaluation set.
    pub measured_f1: f64,
}

impl OodDetector {
    /// Noiseless thresholded decision.
    pub fn raw_is_ood(&self, row: &[f64]) -> bool {
        self.model.positive_proba(row) >= self.threshold
    }

    pub fn is_ood(&self, row: &[f64]) -> bool {
        let raw = self.raw_is_ood(row);
        if self.flip_rate <= 0.0 {
            return raw;
        }
        let u = seed::unit_interval(seed::hash_row(row, self.noise_seed));
        if u >= self.flip_rate {
            return raw;
        }
        match self.flip_mode {
            FlipMode::MissOnly => false,
            FlipMode::Symmetric => !raw,
        }
    }

    pub fn f1_on(&self, eval: &Dataset) -> Result<f64> {
        let predictions: Vec<u8> = eval.rows().map(|r| u8::from(self.is_ood(r))).collect();
        Ok(metrics_from_predictions(&predictions, eval.labels())?.f1)
    }

    fn with_noise(&self, flip_rate: f64, noise_seed: u64) -> Self {
        Self {
            flip_rate,
            noise_seed,
            ..self.clone()
        }
    }
}

/// Trains a detector on real rows (label 0) against perturbations of them
/// (label 1). Real rows are split first; the detector is fit on one part
/// and scored on an OOD set built from the other. Returns the detector and
/// that held-out evaluation set.
pub fn train_ood_detector(
    x: &Dataset,
    mode: PerturbMode,
    config: &OodTrainConfig,
    seed_: u64,
) -> Result<(OodDetector, Dataset)> {
    if x.n_rows() < 2 {
        return Err(Error::Adversarial(format!(
            "need at least 2 real rows to train an OOD detector, got {}",
            x.n_rows()
        )));
    }
    let (train_real, eval_real) = split(x, config.holdout_fraction, seed::derive(seed_, 1))?;
    let bgs = config.shap_backgrounds.as_deref();
    let train = build_ood_training_set_with_backgrounds(
        &train_real,
        mode,
        config.n_per_instance,
        bgs,
        seed::derive(seed_, 2),
    )?;
    let eval = build_ood_training_set_with_backgrounds(
        &eval_real,
        mode,
        config.eval_per_instance,
        bgs,
        seed::derive(seed_, 3),
    )?;
    for (name, set) in [("training", &train), ("evaluation", &eval)] {
        let positives = set.labels().iter().filter(|&&l| l == 1).count();
        if positives == 0 || positives == set.n_rows() {
            return Err(Error::Adversarial(format!(
                "OOD {name} set is degenerate: all {} rows share one label",
                set.n_rows()
            )));
        }
    }
    let model = match &config.learner {
        DetectorLearner::Forest(h) => {
            let hyper = ForestHyper {
                seed: seed::derive(seed_, 4) ^ h.seed,
                ..h.clone()
            };
            Model::Forest(train_forest(&train, &hyper)?)
        }
        DetectorLearner::Logistic(h) => Model::Logistic(train_logistic(&train, h)?),
    };
    let mut detector = OodDetector {
        model,
        mode,
        threshold: OOD_THRESHOLD,
        flip_rate: 0.0,
        flip_mode: FlipMode::default(),
        noise_seed: seed::derive(seed_, 5),
        heldout_f1: 0.0,
        measured_f1: 0.0,
    };
    detector.heldout_f1 = detector.f1_on(&eval)?;
    detector.measured_f1 = detector.heldout_f1;
    Ok((detector, eval))
}

/// Returns a copy of `detector` whose decisions are flipped at a rate
/// found by bisection so that its F1 on `eval` is within `tolerance` of
/// `target_f1`. Flips depend only on the row contents and `seed`.
pub fn degrade_detector(
    detector: &OodDetector,
    target_f1: f64,
    eval: &Dataset,
    tolerance: f64,
    flip_mode: FlipMode,
    seed_: u64,
) -> Result<OodDetector> {
    if !(target_f1 > 0.0 && target_f1 <= 1.0) {
        return Err(Error::Adversarial(format!("target F1 {target_f1} outside (0, 1]")));
    }
    let base = OodDetector {
        flip_mode,
        ..detector.with_noise(0.0, seed_)
    };
    let base_f1 = base.f1_on(eval)?;
    if (base_f1 - target_f1).abs() <= tolerance {
        return Ok(OodDetector {
            measured_f1: base_f1,
            ..base
        });
    }
    if target_f1 > base_f1 {
        return Err(Error::Adversarial(format!(
            "target F1 {target_f1} exceeds the detector's F1 {base_f1:.4} on the evaluation set"
        )));
    }
    let (mut lo, mut hi) = (0.0, flip_mode.max_rate());
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let candidate = base.with_noise(mid, seed_);
        let f1 = candidate.f1_on(eval)?;
        if (f1 - target_f1).abs() <= tolerance {
            return Ok(OodDetector {
                measured_f1: f1,
                ..candidate
            });
        }
        if f1 > target_f1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Adversarial(format!(
        "flip-rate bisection did not reach F1 {target_f1} +/- {tolerance} in {MAX_BISECTION_STEPS} steps"
    )))
}

/// `e(x) = f(x)` when the detector calls `x` in-distribution, else `psi(x)`.
#[derive(Debug, Clone)]
pub struct ScaffoldModel {
    f: SharedModel,
    psi: SharedModel,
    detector: Arc<OodDetector>,
}

pub fn build_scaffold(f: SharedModel, psi: SharedModel, detector: OodDetector) -> ScaffoldModel {
    ScaffoldModel {
        f,
        psi,
        detector: Arc::new(detector),
    }
}

impl ScaffoldModel {
    pub fn detector(&self) -> &OodDetector {
        &self.detector
    }

    pub fn describe(&self, f_name: &str, psi_name: &str) -> ScaffoldDescription {
        let d = &self.detector;
        ScaffoldDescription {
            f: f_name.to_string(),
            psi: psi_name.to_string(),
            detector_learner: d.model.kind().to_string(),
            detector_mode: d.mode,
            threshold: d.threshold,
            heldout_f1: d.heldout_f1,
            measured_f1: d.measured_f1,
            flip_rate: d.flip_rate,
            flip_mode: d.flip_mode,
            noise_seed: d.noise_seed,
        }
    }
}

impl BlackBoxModel for ScaffoldModel {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        if self.detector.is_ood(row) {
            self.psi.predict_proba(row)
        } else {
            self.f.predict_proba(row)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaffoldDescription {
    pub f: String,
    pub psi: String,
    pub detector_learner: String,
    pub detector_mode: PerturbMode,
    pub threshold: f64,
    pub heldout_f1: f64,
    pub measured_f1: f64,
    pub flip_rate: f64,
    pub flip_mode: FlipMode,
    pub noise_seed: u64,
}

impl ScaffoldDescription {
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("description serializes")
    }
}

/// Fraction of rows on which `e` and `f` predict the same class.
pub fn fidelity(e: &dyn BlackBoxModel, f: &dyn BlackBoxModel, x: &Dataset) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Adversarial("fidelity on an empty dataset".into()));
    }
    let agree = x.rows().filter(|r| e.predict(r) == f.predict(r)).count();
    Ok(agree as f64 / x.n_rows() as f64)
}
