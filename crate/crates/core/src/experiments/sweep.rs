use std::sync::Arc;

use rayon::prelude::*;

use super::{cell_seed, explain_instances, sample_instances, ExplainerSuite};
use crate::adversarial::{build_scaffold, degrade_detector, FlipMode, OodDetector};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::explainers::{rank_features, AttributionRecord, ExplainerTag};
use crate::model::SharedModel;

/// Scaffold ingredients: the biased and innocuous models and, per
/// explainer, the undegraded detector it is attacked with plus that
/// detector's held-out evaluation set.
#[derive(Debug, Clone)]
pub struct AttackSet {
    pub f: SharedModel,
    pub psi: SharedModel,
    pub detectors: Vec<(ExplainerTag, Arc<OodDetector>, Arc<Dataset>)>,
    pub flip_mode: FlipMode,
    pub tolerance: f64,
}

impl AttackSet {
    fn detector_for(&self, tag: ExplainerTag) -> Result<(&Arc<OodDetector>, &Arc<Dataset>)> {
        self.detectors
            .iter()
            .find(|(t, _, _)| *t == tag)
            .map(|(_, d, e)| (d, e))
            .ok_or_else(|| Error::Experiment(format!("no detector configured for explainer `{tag}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub f1_target: f64,
    pub explainer: ExplainerTag,
    pub f1_achieved: Option<f64>,
    pub flip_rate: Option<f64>,
    pub detection_rate: Option<f64>,
    pub n_instances: usize,
    pub noise_seed: u64,
    pub explain_seed: u64,
    pub error: Option<String>,
    pub records: Vec<AttributionRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub f1_targets: Vec<f64>,
    pub explainers: Vec<ExplainerTag>,
    pub instances: Vec<usize>,
    /// Target-major, explainer-minor.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, target: f64, explainer: ExplainerTag) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.explainer == explainer && (c.f1_target - target).abs() < 1e-12)
    }

    /// Detection rates for one explainer in target order; `None` where the
    /// cell failed.
    pub fn rates(&self, explainer: ExplainerTag) -> Vec<Option<f64>> {
        self.f1_targets
            .iter()
            .map(|&t| self.cell(t, explainer).and_then(|c| c.detection_rate))
            .collect()
    }
}

/// Fraction of attributions that rank `feature` first.
pub fn detection_rate(records: &[AttributionRecord], feature: usize) -> f64 {
    let hits = records
        .iter()
        .filter(|r| rank_features(&r.attribution).first() == Some(&feature))
        .count();
    hits as f64 / records.len().max(1) as f64
}

/// For every target and explainer: degrade that explainer's detector to the
/// target F1, build the scaffold, explain the same `n_explain` test rows and
/// record how often the sensitive feature ranks first. Cells are
/// independent; `parallel` bounds how many run at once. A target that
/// cannot be reached is reported in its cell.
#[allow(clippy::too_many_arguments)]
pub fn run_sensitivity_sweep(
    f1_targets: &[f64],
    explainers: &[ExplainerTag],
    attack: &AttackSet,
    suite: &ExplainerSuite,
    test: &Dataset,
    n_explain: usize,
    seed_: u64,
    parallel: usize,
) -> Result<SweepResult> {
    if f1_targets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("experiment.f1_targets", "targets must be strictly ascending"));
    }
    if let Some(t) = f1_targets.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::config("experiment.f1_targets", format!("target {t} outside (0, 1]")));
    }
    for &tag in explainers {
        attack.detector_for(tag)?;
    }
    let instances = sample_instances(test, n_explain, seed_)?;
    let sensitive = test.schema().sensitive_index();
    let jobs: Vec<(f64, ExplainerTag)> = f1_targets
        .iter()
        .flat_map(|&t| explainers.iter().map(move |&e| (t, e)))
        .collect();

    let run_cell = |&(target, tag): &(f64, ExplainerTag)| -> SweepCell {
        let (detector, eval) = attack.detector_for(tag).expect("checked above");
        let target_key = format!("{target}");
        let noise_seed = cell_seed(seed_, &["degrade", &target_key, detector.mode.as_str()]);
        let explain_seed = cell_seed(seed_, &["sweep", &target_key, tag.as_str()]);
        let mut cell = SweepCell {
            f1_target: target,
            explainer: tag,
            f1_achieved: None,
            flip_rate: None,
            detection_rate: None,
            n_instances: 0,
            noise_seed,
            explain_seed,
            error: None,
            records: Vec::new(),
        };
        let degraded = match degrade_detector(detector, target, eval, attack.tolerance, attack.flip_mode, noise_seed) {
            Ok(d) => d,
            Err(e) => {
                cell.error = Some(e.to_string());
                return cell;
            }
        };
        cell.f1_achieved = Some(degraded.measured_f1);
        cell.flip_rate = Some(degraded.flip_rate);
        let scaffold = build_scaffold(attack.f.clone(), attack.psi.clone(), degraded);
        match explain_instances(suite, tag, &scaffold, test, &instances, explain_seed, "") {
            Ok(records) => {
                cell.detection_rate = Some(detection_rate(&records, sensitive));
                cell.n_instances = records.len();
                cell.records = records;
            }
            Err(e) => cell.error = Some(e.to_string()),
        }
        cell
    };

    let cells: Vec<SweepCell> = if parallel <= 1 {
        jobs.iter().map(run_cell).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| Error::Experiment(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run_cell).collect())
    };
    Ok(SweepResult {
        f1_targets: f1_targets.to_vec(),
        explainers: explainers.to_vec(),
        instances,
        cells,
    })
}
