//! Classifiers used as the biased model, the innocuous model and the OOD
//! learner, plus classification metrics and (de)serialization.

mod forest;
mod logistic;
mod metrics;
mod rule;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use forest::{train_forest, DecisionTree, ForestHyper, ForestModel, TreeNode};
pub use logistic::{train_logistic, LogisticHyper, LogisticModel};
pub use metrics::{evaluate, metrics_from_predictions, ClassificationMetrics};
pub use rule::{make_biased_rule, make_unbiased_rule, RuleCondition, RuleModel};

use crate::error::{Error, Result};
use crate::model::BlackBoxModel;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Any of the concrete learners; the persisted form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    Rule(RuleModel),
    Logistic(LogisticModel),
    Forest(ForestModel),
}

impl BlackBoxModel for Model {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        match self {
            Model::Rule(m) => m.predict_proba(row),
            Model::Logistic(m) => m.predict_proba(row),
            Model::Forest(m) => m.predict_proba(row),
        }
    }
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Rule(_) => "rule",
            Model::Logistic(_) => "logistic",
            Model::Forest(_) => "forest",
        }
    }

    pub fn to_json(&self) -> String {
        let saved = SavedModel {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        serde_json::to_string_pretty(&saved).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let saved: SavedModel =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("bad model file: {e}")))?;
        if saved.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                saved.format_version
            )));
        }
        Ok(saved.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct SavedModel {
    format_version: u32,
    model: Model,
}

fn check_trainable(train: &crate::data::Dataset) -> Result<()> {
    if train.n_rows() < 2 {
        return Err(Error::Model(format!(
            "training needs at least 2 rows, got {}",
            train.n_rows()
        )));
    }
    let positives = train.labels().iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == train.n_rows() {
        return Err(Error::Model(
            "training set contains a single class".to_string(),
        ));
    }
    Ok(())
}
