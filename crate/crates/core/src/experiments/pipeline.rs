use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::index::sample;

use super::config::{AchievedF1, DataSource, ExperimentConfig, ExperimentKind, Manifest, ARTIFACT_VERSION};
use super::report::{emit_sweep_attributions, emit_top3_attributions, write_svg_pca};
use super::{
    emit_pca, emit_sweep, emit_top3, pca_separability, run_pca, run_sensitivity_sweep, run_top3,
    write_svg_sweep, AttackSet, ExplainerSuite, PcaProjection, Subject, SweepResult, Top3Report,
};
use crate::adversarial::{build_scaffold, fidelity, train_ood_detector, OodDetector, OodTrainConfig};
use crate::data::{fit_standardization, generate_synthetic, load_csv, medoid, split, Dataset};
use crate::error::{Error, Result};
use crate::explainers::{ExplainerTag, ShapConfig};
use crate::model::SharedModel;
use crate::models::{make_biased_rule, make_unbiased_rule};
use crate::perturb::PerturbMode;
use crate::seed;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub top3: Option<Top3Report>,
    pub sweep: Option<SweepResult>,
    pub pca: Option<PcaProjection>,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    let path = dir.join("manifest.toml");
    fs::write(&path, m.to_toml_string()).map_err(|e| Error::io(path, e))
}

fn attack_mode(tag: ExplainerTag, shlime_attack: PerturbMode) -> PerturbMode {
    match tag {
        ExplainerTag::Lime => PerturbMode::Lime,
        ExplainerTag::Shap | ExplainerTag::Exact => PerturbMode::Shap,
        ExplainerTag::Shlime => shlime_attack,
    }
}

struct Prepared {
    train: Dataset,
    test: Dataset,
    f: SharedModel,
    psi: SharedModel,
    suite: ExplainerSuite,
}

/// Runs the experiment selected by `config`, writing into `out_dir`. The
/// manifest is written first, per-instance attributions next, the result
/// CSV last. `parallel` bounds concurrent sweep cells.
pub fn run_config(config: &ExperimentConfig, out_dir: &Path, parallel: usize) -> Result<RunOutcome> {
    config.validate()?;
    let tags = config.explainer_tags()?;
    let sign_policy = config.sign_policy()?;
    let shlime_attack = config.shlime_attack()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let master = config.seed;
    let mut seeds = BTreeMap::new();
    seeds.insert("master".to_string(), master);
    let data_seed = match &config.data {
        DataSource::Synthetic(s) => s.seed.unwrap_or(seed::derive(master, 1)),
        DataSource::Csv { .. } => 0,
    };
    seeds.insert("data".into(), data_seed);
    for (name, tag) in [("split", 2), ("backgrounds", 3), ("detector_lime", 10), ("detector_shap", 11), ("experiment", 20)] {
        seeds.insert(name.into(), seed::derive(master, tag));
    }
    let mut manifest = Manifest {
        artifact_version: ARTIFACT_VERSION.to_string(),
        status: "running".into(),
        experiment: config.experiment.name().into(),
        started_unix: now_unix(),
        finished_unix: None,
        seeds: seeds.clone(),
        outputs: Vec::new(),
        scaffolds: Vec::new(),
        achieved: Vec::new(),
        cell_errors: Vec::new(),
        metrics: BTreeMap::new(),
        config: config.clone(),
    };
    write_manifest(out_dir, &manifest)?;

    let data = match &config.data {
        DataSource::Synthetic(s) => generate_synthetic(&s.to_config(data_seed))?,
        DataSource::Csv { path, schema } => load_csv(path, schema)?,
    };
    let schema = data.schema_arc();
    let (train, test) = split(&data, config.test_fraction, seeds["split"])?;

    let psi_index = match &config.models.psi_feature {
        Some(name) => schema.index_of(name).ok_or_else(|| {
            Error::config("models.psi_feature", format!("no feature named `{name}` in the schema"))
        })?,
        None => *schema.uncorrelated_indices().first().ok_or_else(|| {
            Error::config("models.psi_feature", "schema declares no uncorrelated feature")
        })?,
    };
    let f: SharedModel = Arc::new(make_biased_rule(&schema)?);
    let psi: SharedModel = Arc::new(make_unbiased_rule(&schema, psi_index)?);

    let stats = fit_standardization(&train)?;
    let sh = &config.explainers.shap;
    let backgrounds = if sh.n_backgrounds == 1 {
        vec![medoid(&train, &stats)?]
    } else {
        let k = sh.n_backgrounds.min(train.n_rows());
        let mut idx = sample(&mut seed::rng(seeds["backgrounds"]), train.n_rows(), k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| train.row(i).to_vec()).collect()
    };
    let suite = ExplainerSuite {
        stats,
        lime: config.explainers.lime.clone(),
        shap: ShapConfig {
            n_coalitions: sh.n_coalitions,
            exact_threshold: sh.exact_threshold,
            backgrounds,
        },
        sign_policy,
    };
    let prep = Prepared {
        train,
        test,
        f,
        psi,
        suite,
    };

    let train_detector = |mode: PerturbMode| -> Result<(OodDetector, Dataset)> {
        let d = &config.models.detector;
        let cfg = OodTrainConfig {
            learner: d.learner.clone(),
            n_per_instance: d.n_per_instance,
            eval_per_instance: d.eval_per_instance,
            holdout_fraction: d.holdout_fraction,
            shap_backgrounds: (mode == PerturbMode::Shap).then(|| prep.suite.shap.backgrounds.clone()),
        };
        let s = match mode {
            PerturbMode::Lime => seeds["detector_lime"],
            PerturbMode::Shap => seeds["detector_shap"],
        };
        train_ood_detector(&prep.train, mode, &cfg, s)
    };
    let mut needed: Vec<PerturbMode> = tags.iter().map(|&t| attack_mode(t, shlime_attack)).collect();
    needed.sort_by_key(|m| m.as_str());
    needed.dedup();
    let mut detectors: Vec<(PerturbMode, Arc<OodDetector>, Arc<Dataset>)> = Vec::new();
    for &mode in &needed {
        let (det, eval) = train_detector(mode)?;
        let scaffold = build_scaffold(prep.f.clone(), prep.psi.clone(), det.clone());
        manifest
            .metrics
            .insert(format!("fidelity_{}", mode.as_str()), fidelity(&scaffold, prep.f.as_ref(), &prep.test)?);
        manifest
            .scaffolds
            .push(scaffold.describe("biased_rule", &format!("rule:{}", schema.features()[psi_index].name)));
        detectors.push((mode, Arc::new(det), Arc::new(eval)));
    }
    let detector_for = |mode: PerturbMode| {
        detectors
            .iter()
            .find(|(m, _, _)| *m == mode)
            .map(|(_, d, e)| (d.clone(), e.clone()))
            .expect("trained above")
    };

    let exp_seed = seeds["experiment"];
    let mut outcome = RunOutcome {
        out_dir: out_dir.to_path_buf(),
        manifest: manifest.clone(),
        top3: None,
        sweep: None,
        pca: None,
    };
    match &config.experiment {
        ExperimentKind::Top3 { n_explain, .. } => {
            let mut scaffold = Subject::new("scaffold", prep.f.clone());
            for &tag in &tags {
                let (det, _) = detector_for(attack_mode(tag, shlime_attack));
                let model: SharedModel = Arc::new(build_scaffold(prep.f.clone(), prep.psi.clone(), (*det).clone()));
                scaffold.per_explainer.push((tag, model));
            }
            let subjects = vec![Subject::new("biased", prep.f.clone()), scaffold];
            let report = run_top3(&subjects, &tags, &prep.suite, &prep.test, *n_explain, exp_seed)?;
            for c in &report.cells {
                if let Some(e) = &c.error {
                    manifest.cell_errors.push(format!("{}/{}: {e}", c.classifier_tag, c.explainer));
                }
            }
            manifest.write_progress(out_dir)?;
            emit_top3_attributions(&report, &schema, out_dir)?;
            manifest.finish(out_dir, &["attributions_top3.csv", "top3.csv"])?;
            emit_top3(&report, out_dir)?;
            outcome.top3 = Some(report);
        }
        ExperimentKind::Sweep {
            f1_targets,
            n_explain,
            tolerance,
            flip_mode,
            plot,
            ..
        } => {
            let attack = AttackSet {
                f: prep.f.clone(),
                psi: prep.psi.clone(),
                detectors: tags
                    .iter()
                    .map(|&t| {
                        let (d, e) = detector_for(attack_mode(t, shlime_attack));
                        (t, d, e)
                    })
                    .collect(),
                flip_mode: *flip_mode,
                tolerance: *tolerance,
            };
            let result = run_sensitivity_sweep(
                f1_targets,
                &tags,
                &attack,
                &prep.suite,
                &prep.test,
                *n_explain,
                exp_seed,
                parallel,
            )?;
            for c in &result.cells {
                manifest.achieved.push(AchievedF1 {
                    f1_target: c.f1_target,
                    explainer: c.explainer.to_string(),
                    f1_achieved: c.f1_achieved,
                    flip_rate: c.flip_rate,
                    noise_seed: c.noise_seed,
                    explain_seed: c.explain_seed,
                });
                if let Some(e) = &c.error {
                    manifest.cell_errors.push(format!("f1={}/{}: {e}", c.f1_target, c.explainer));
                }
            }
            manifest.write_progress(out_dir)?;
            emit_sweep_attributions(&result, &schema, out_dir)?;
            let mut outputs = vec!["attributions_sweep.csv"];
            if *plot {
                write_svg_sweep(&result, &out_dir.join("sweep.svg"))?;
                outputs.push("sweep.svg");
            }
            outputs.push("sweep.csv");
            manifest.finish(out_dir, &outputs)?;
            emit_sweep(&result, out_dir)?;
            outcome.sweep = Some(result);
        }
        ExperimentKind::Pca {
            mode,
            n_per_instance,
            plot,
        } => {
            let bgs = if *mode == PerturbMode::Shap {
                prep.suite.shap.backgrounds.clone()
            } else {
                Vec::new()
            };
            let proj = run_pca(&prep.train, *mode, *n_per_instance, &bgs, exp_seed)?;
            let (acc, base) = pca_separability(&proj, seed::derive(exp_seed, 1))?;
            manifest.metrics.insert("pca_logistic_accuracy".into(), acc);
            manifest.metrics.insert("pca_majority_baseline".into(), base);
            manifest.metrics.insert("pca_ev1".into(), proj.explained_variance[0]);
            manifest.metrics.insert("pca_ev2".into(), proj.explained_variance[1]);
            let mut outputs = Vec::new();
            if *plot {
                write_svg_pca(&proj, &out_dir.join("pca.svg"))?;
                outputs.push("pca.svg");
            }
            outputs.extend(["pca_meta.csv", "pca.csv"]);
            manifest.finish(out_dir, &outputs)?;
            emit_pca(&proj, out_dir)?;
            outcome.pca = Some(proj);
        }
    }
    outcome.manifest = manifest;
    Ok(outcome)
}

impl Manifest {
    fn write_progress(&self, dir: &Path) -> Result<()> {
        write_manifest(dir, self)
    }

    fn finish(&mut self, dir: &Path, outputs: &[&str]) -> Result<()> {
        self.status = "complete".into();
        self.finished_unix = Some(now_unix());
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        write_manifest(dir, self)
    }
}
