use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xailab::adversarial::{train_ood_detector, DetectorLearner, FlipMode, OodTrainConfig};
use xailab::data::{fit_standardization, generate_synthetic, split, SyntheticConfig};
use xailab::ensemble::SignPolicy;
use xailab::experiments::{run_config, run_sensitivity_sweep, AttackSet, ExperimentConfig, ExplainerSuite};
use xailab::explainers::{exact_shapley, explain_kernel_shap, ExplainerTag, LimeConfig, ShapConfig};
use xailab::model::{FnModel, SharedModel};
use xailab::models::{make_biased_rule, make_unbiased_rule, ForestHyper};
use xailab::perturb::PerturbMode;

const SMALL_TOP3: &str = r#"
seed = 3
[data.synthetic]
n_rows = 500
[models.detector.learner]
type = "forest"
n_trees = 30
max_depth = 20
max_features = 64
seed = 0
min_samples_split = 2
[explainers.lime]
n_samples = 800
[explainers.shap]
n_coalitions = 256
n_backgrounds = 2
[experiment]
kind = "top3"
explainers = ["lime", "shap", "shlime"]
n_explain = 12
"#;

#[test]
fn top3_fractions_recompute_from_attribution_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_toml_str(SMALL_TOP3).unwrap();
    let out = run_config(&config, dir.path(), 1).unwrap();
    let report = out.top3.unwrap();
    assert_eq!(out.manifest.status, "complete");
    for f in &out.manifest.outputs {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let mut reader = csv::Reader::from_path(dir.path().join("attributions_top3.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    let features = &header[4..];
    // (classifier, explainer) -> feature -> count, plus instance totals
    let mut tallies: BTreeMap<(String, String), (Vec<usize>, usize)> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let classifier = rec[0].split(':').next().unwrap().to_string();
        let weights: Vec<f64> = rec.iter().skip(4).map(|v| v.parse().unwrap()).collect();
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| weights[b].abs().total_cmp(&weights[a].abs()).then(a.cmp(&b)));
        let entry = tallies
            .entry((classifier, rec[1].to_string()))
            .or_insert_with(|| (vec![0; weights.len()], 0));
        for &j in &order[..3] {
            entry.0[j] += 1;
        }
        entry.1 += 1;
    }
    assert_eq!(tallies.len(), 6);
    for ((classifier, explainer), (counts, n)) in tallies {
        let cell = report
            .cell(&classifier, explainer.parse().unwrap())
            .unwrap_or_else(|| panic!("{classifier}/{explainer}"));
        assert_eq!(cell.n_instances, n);
        for (j, name) in features.iter().enumerate() {
            let frac = cell.fraction(name).unwrap();
            assert!((frac - counts[j] as f64 / n as f64).abs() < 1e-12, "{classifier}/{explainer}/{name}");
        }
    }

    let csv = fs::read_to_string(dir.path().join("top3.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6 * features.len());
}

const SMALL_SWEEP: &str = r#"
seed = 8
[data.synthetic]
n_rows = 400
[models.detector.learner]
type = "forest"
n_trees = 20
max_depth = 20
max_features = 64
seed = 0
min_samples_split = 2
[explainers.lime]
n_samples = 500
[explainers.shap]
n_coalitions = 128
n_backgrounds = 2
[experiment]
kind = "sweep"
explainers = ["lime", "shlime"]
f1_targets = [0.5, 0.7, 0.9]
n_explain = 6
tolerance = 0.05
plot = true
"#;

#[test]
fn sweep_is_a_pure_function_of_config_and_seed() {
    let config = ExperimentConfig::from_toml_str(SMALL_SWEEP).unwrap();
    let a_dir = tempfile::tempdir().unwrap();
    let b_dir = tempfile::tempdir().unwrap();
    let a = run_config(&config, a_dir.path(), 1).unwrap();
    let b = run_config(&config, b_dir.path(), 3).unwrap();
    assert_eq!(a.sweep, b.sweep);
    assert_eq!(a.manifest.achieved, b.manifest.achieved);
    for f in ["sweep.csv", "attributions_sweep.csv", "sweep.svg"] {
        assert_eq!(
            fs::read(a_dir.path().join(f)).unwrap(),
            fs::read(b_dir.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let sweep = a.sweep.unwrap();
    assert_eq!(sweep.cells.len(), 6);
    // LIME and SHLIME cells share the detector and so its noise seed
    for t in [0.5, 0.7, 0.9] {
        let l = sweep.cell(t, ExplainerTag::Lime).unwrap();
        let s = sweep.cell(t, ExplainerTag::Shlime).unwrap();
        assert_eq!(l.noise_seed, s.noise_seed);
        assert_eq!(l.f1_achieved, s.f1_achieved);
    }
}

#[test]
fn lime_detection_falls_as_detector_improves() {
    let data = generate_synthetic(&SyntheticConfig {
        n_rows: 1000,
        seed: 21,
        ..Default::default()
    })
    .unwrap();
    let (train, test) = split(&data, 0.2, 1).unwrap();
    let schema = data.schema_arc();
    let f: SharedModel = Arc::new(make_biased_rule(&schema).unwrap());
    let psi: SharedModel = Arc::new(make_unbiased_rule(&schema, schema.uncorrelated_indices()[0]).unwrap());
    let config = OodTrainConfig {
        learner: DetectorLearner::Forest(ForestHyper {
            n_trees: 50,
            max_depth: 30,
            max_features: Some(64),
            ..Default::default()
        }),
        ..Default::default()
    };
    let (det, eval) = train_ood_detector(&train, PerturbMode::Lime, &config, 4).unwrap();
    let mut targets = vec![0.5, 0.6, 0.7, 0.8, 0.9];
    if det.heldout_f1 > 0.9 + 1e-9 {
        targets.push(det.heldout_f1);
    }
    let suite = ExplainerSuite {
        stats: fit_standardization(&train).unwrap(),
        lime: LimeConfig {
            n_samples: 1000,
            ..Default::default()
        },
        shap: ShapConfig::single(train.row(0).to_vec()),
        sign_policy: SignPolicy::SignedProduct,
    };
    let attack = AttackSet {
        f,
        psi,
        detectors: vec![(ExplainerTag::Lime, Arc::new(det), Arc::new(eval))],
        flip_mode: FlipMode::MissOnly,
        tolerance: 0.03,
    };
    let result = run_sensitivity_sweep(&targets, &[ExplainerTag::Lime], &attack, &suite, &test, 40, 2, 4).unwrap();
    let rates: Vec<f64> = result.rates(ExplainerTag::Lime).into_iter().map(Option::unwrap).collect();
    for w in rates.windows(2) {
        assert!(w[1] <= w[0] + 0.1, "{rates:?}");
    }
}

#[test]
fn kernel_shap_error_shrinks_with_budget() {
    let m = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let terms: Vec<(usize, usize, f64)> = (0..20)
        .map(|_| (rng.random_range(0..m), rng.random_range(0..m), rng.random_range(0.0..0.05)))
        .collect();
    let model = FnModel(move |x: &[f64]| {
        terms
            .iter()
            .map(|&(i, j, a)| if x[i] > 0.0 && x[j] < 0.5 { a } else { 0.0 })
            .sum::<f64>()
    });
    let instances: Vec<(Vec<f64>, Vec<f64>)> = (0..50)
        .map(|_| {
            let o = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            (o, b)
        })
        .collect();
    let exact: Vec<Vec<f64>> = instances
        .iter()
        .map(|(o, b)| exact_shapley(&model, o, b).unwrap().weights)
        .collect();
    let mut medians = Vec::new();
    for budget in [100, 200, 400, 800, 1600] {
        let mut errs: Vec<f64> = instances
            .iter()
            .zip(&exact)
            .enumerate()
            .map(|(k, ((o, b), truth))| {
                let config = ShapConfig {
                    n_coalitions: budget,
                    exact_threshold: 2,
                    backgrounds: vec![b.clone()],
                };
                let a = explain_kernel_shap(&model, o, &config, k as u64).unwrap();
                a.weights.iter().zip(truth).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        medians.push((errs[24] + errs[25]) / 2.0);
    }
    for w in medians.windows(2) {
        assert!(w[1] <= w[0], "{medians:?}");
    }
}

#[test]
fn manifest_reruns_pca_byte_for_byte() {
    let toml = r#"
seed = 12
[data.synthetic]
n_rows = 300
[experiment]
kind = "pca"
plot = true
"#;
    let first = tempfile::tempdir().unwrap();
    let again = tempfile::tempdir().unwrap();
    let out = run_config(&ExperimentConfig::from_toml_str(toml).unwrap(), first.path(), 1).unwrap();
    assert!(out.manifest.metrics.contains_key("pca_logistic_accuracy"));
    let from_manifest = ExperimentConfig::load(first.path().join("manifest.toml")).unwrap();
    run_config(&from_manifest, again.path(), 1).unwrap();
    for f in ["pca.csv", "pca_meta.csv", "pca.svg"] {
        assert_eq!(
            fs::read(first.path().join(f)).unwrap(),
            fs::read(again.path().join(f)).unwrap(),
            "{f}"
        );
    }
}
