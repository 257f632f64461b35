use super::{cell_seed, explain_instances, sample_instances, ExplainerSuite};
use crate::data::Dataset;
use crate::error::Result;
use crate::explainers::{rank_features, AttributionRecord, ExplainerTag};
use crate::model::SharedModel;

/// A classifier under audit. `per_explainer` overrides `model` for specific
/// explainers, e.g. a scaffold whose detector was trained against that
/// explainer's perturbations.
#[derive(Debug, Clone)]
pub struct Subject {
    pub tag: String,
    pub model: SharedModel,
    pub per_explainer: Vec<(ExplainerTag, SharedModel)>,
}

impl Subject {
    pub fn new(tag: impl Into<String>, model: SharedModel) -> Self {
        Self {
            tag: tag.into(),
            model,
            per_explainer: Vec::new(),
        }
    }

    pub fn model_for(&self, explainer: ExplainerTag) -> &SharedModel {
        self.per_explainer
            .iter()
            .find(|(t, _)| *t == explainer)
            .map(|(_, m)| m)
            .unwrap_or(&self.model)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Top3Cell {
    pub classifier_tag: String,
    pub explainer: ExplainerTag,
    pub n_instances: usize,
    /// Fraction per feature, in schema order.
    pub fractions: Vec<(String, f64)>,
    /// Set when the cell aborted; fractions are then empty.
    pub error: Option<String>,
    pub records: Vec<AttributionRecord>,
}

impl Top3Cell {
    pub fn fraction(&self, feature: &str) -> Option<f64> {
        self.fractions.iter().find(|(n, _)| n == feature).map(|&(_, f)| f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Top3Report {
    pub instances: Vec<usize>,
    pub cells: Vec<Top3Cell>,
}

impl Top3Report {
    pub fn cell(&self, classifier_tag: &str, explainer: ExplainerTag) -> Option<&Top3Cell> {
        self.cells
            .iter()
            .find(|c| c.classifier_tag == classifier_tag && c.explainer == explainer)
    }
}

/// Per-feature share of attributions in which the feature ranks in the top
/// three (all features when there are fewer than three).
pub fn top3_fractions(records: &[AttributionRecord], names: &[&str]) -> Vec<(String, f64)> {
    let mut counts = vec![0usize; names.len()];
    for r in records {
        for &j in rank_features(&r.attribution).iter().take(3) {
            counts[j] += 1;
        }
    }
    let n = records.len().max(1) as f64;
    names
        .iter()
        .zip(counts)
        .map(|(name, c)| (name.to_string(), c as f64 / n))
        .collect()
}

/// Explains the same `n_explain` test rows for every (subject, explainer)
/// pair and tallies top-3 membership. A failing cell is reported in place
/// and the others still run.
pub fn run_top3(
    subjects: &[Subject],
    explainers: &[ExplainerTag],
    suite: &ExplainerSuite,
    test: &Dataset,
    n_explain: usize,
    seed_: u64,
) -> Result<Top3Report> {
    let instances = sample_instances(test, n_explain, seed_)?;
    let names = test.schema().feature_names();
    let mut cells = Vec::new();
    for s in subjects {
        for &tag in explainers {
            let cs = cell_seed(seed_, &["top3", &s.tag, tag.as_str()]);
            let model = s.model_for(tag);
            let cell = match explain_instances(suite, tag, model.as_ref(), test, &instances, cs, "") {
                Ok(records) => Top3Cell {
                    classifier_tag: s.tag.clone(),
                    explainer: tag,
                    n_instances: records.len(),
                    fractions: top3_fractions(&records, &names),
                    error: None,
                    records,
                },
                Err(e) => Top3Cell {
                    classifier_tag: s.tag.clone(),
                    explainer: tag,
                    n_instances: 0,
                    fractions: Vec::new(),
                    error: Some(e.to_string()),
                    records: Vec::new(),
                },
            };
            cells.push(cell);
        }
    }
    Ok(Top3Report { instances, cells })
}
