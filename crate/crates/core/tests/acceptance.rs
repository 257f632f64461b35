//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion
//! and fails if any criterion fails. Run with `--nocapture` to see the
//! report on success too.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xailab::adversarial::{build_scaffold, fidelity, train_ood_detector, OodTrainConfig};
use xailab::data::{generate_synthetic, split, Dataset, SyntheticConfig};
use xailab::experiments::{run_config, ExperimentConfig, RunOutcome};
use xailab::explainers::{exact_shapley, explain_kernel_shap, ExplainerTag, ShapConfig};
use xailab::model::{BlackBoxModel, FnModel};
use xailab::models::{make_biased_rule, make_unbiased_rule, train_forest, ForestHyper, ForestModel};
use xailab::perturb::PerturbMode;

const MASTER_SEED: u64 = 42;
const N_MODELS: usize = 20;

struct Report {
    lines: Vec<String>,
    failed: usize,
}

impl Report {
    fn record(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        let line = format!("{} criterion {id} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push(line);
        if !pass {
            self.failed += 1;
        }
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

/// Forest on `m` synthetic features with labels from a random linear rule,
/// so that every feature can matter.
fn random_forest(m: usize, rng: &mut ChaCha8Rng) -> (ForestModel, Dataset) {
    let base = generate_synthetic(&SyntheticConfig {
        n_rows: 300,
        n_noise_features: m - 2,
        n_uncorrelated: 1,
        seed: rng.random(),
        ..Default::default()
    })
    .unwrap();
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels: Vec<u8> = base
        .rows()
        .map(|r| {
            let s: f64 = r.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() - 0.3;
            u8::from(s > 0.0)
        })
        .collect();
    let data = Dataset::new(base.schema_arc(), base.values().to_vec(), labels).unwrap();
    let forest = train_forest(
        &data,
        &ForestHyper {
            n_trees: 10,
            max_depth: 6,
            seed: rng.random(),
            ..Default::default()
        },
    )
    .unwrap();
    (forest, data)
}

fn exact_mode(background: Vec<f64>) -> ShapConfig {
    ShapConfig {
        exact_threshold: 12,
        ..ShapConfig::single(background)
    }
}

fn shapley_criteria(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let start = Instant::now();
    let mut worst_oracle = 0.0f64;
    let mut worst_efficiency = 0.0f64;
    let mut worst_missing = 0.0f64;
    let mut n_missing = 0usize;
    for k in 0..N_MODELS {
        let m = 3 + k % 6;
        let (forest, data) = random_forest(m, &mut rng);
        let origin = data.row(rng.random_range(0..data.n_rows())).to_vec();
        let mut background = data.row(rng.random_range(0..data.n_rows())).to_vec();
        // share one or two coordinates with the origin to exercise missingness
        for _ in 0..1 + k % 2 {
            let j = rng.random_range(0..m);
            background[j] = origin[j];
        }
        let exact = exact_shapley(&forest, &origin, &background).unwrap();
        let kernel = explain_kernel_shap(&forest, &origin, &exact_mode(background.clone()), k as u64).unwrap();
        for (a, b) in kernel.weights.iter().zip(&exact.weights) {
            worst_oracle = worst_oracle.max((a - b).abs());
        }
        let total = kernel.intercept + kernel.weights.iter().sum::<f64>();
        worst_efficiency = worst_efficiency.max((total - forest.positive_proba(&origin)).abs());
        for j in (0..m).filter(|&j| origin[j] == background[j]) {
            worst_missing = worst_missing.max(kernel.weights[j].abs());
            n_missing += 1;
        }
    }
    let elapsed = start.elapsed();
    report.record(
        1,
        "Shapley oracle equivalence",
        worst_oracle <= 1e-6 && elapsed <= Duration::from_secs(60),
        format!("max |kernel - exact| = {worst_oracle:.2e} (tol 1e-6) over {N_MODELS} forests, {}", secs(elapsed)),
    );
    report.record(
        2,
        "local accuracy and missingness",
        worst_efficiency <= 1e-8 && worst_missing <= 1e-6 && n_missing > 0,
        format!(
            "max |phi0 + sum phi - f(x)| = {worst_efficiency:.2e} (tol 1e-8); max |phi_j| on {n_missing} shared coordinates = {worst_missing:.2e} (tol 1e-6)"
        ),
    );
}

fn linear_criterion(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + 1);
    let mut worst = 0.0f64;
    for _ in 0..N_MODELS {
        let m = rng.random_range(2..=10);
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(-0.4..0.4) / m as f64).collect();
        let b0 = 0.5;
        let model = {
            let w = w.clone();
            FnModel(move |r: &[f64]| b0 + r.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>())
        };
        let origin: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let background: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = explain_kernel_shap(&model, &origin, &exact_mode(background.clone()), 0).unwrap();
        for j in 0..m {
            worst = worst.max((a.weights[j] - w[j] * (origin[j] - background[j])).abs());
        }
    }
    report.record(
        3,
        "linear closed form",
        worst <= 1e-6,
        format!("max |phi_j - w_j (x_j - b_j)| = {worst:.2e} (tol 1e-6)"),
    );
}

fn fidelity_criterion(report: &mut Report) {
    let start = Instant::now();
    let data = generate_synthetic(&SyntheticConfig {
        n_rows: 2000,
        bias_strength: 0.9,
        seed: MASTER_SEED,
        ..Default::default()
    })
    .unwrap();
    let (train, test) = split(&data, 0.2, MASTER_SEED).unwrap();
    let schema = data.schema();
    let f = make_biased_rule(schema).unwrap();
    let psi = make_unbiased_rule(schema, schema.uncorrelated_indices()[0]).unwrap();
    let (det, _) = train_ood_detector(&train, PerturbMode::Lime, &OodTrainConfig::default(), MASTER_SEED).unwrap();
    let f1 = det.heldout_f1;
    let e = build_scaffold(std::sync::Arc::new(f.clone()), std::sync::Arc::new(psi), det);
    let fid = fidelity(&e, &f, &test).unwrap();
    let elapsed = start.elapsed();
    report.record(
        4,
        "scaffold fidelity",
        fid >= 0.99 && elapsed <= Duration::from_secs(120),
        format!(
            "agreement with f on {} held-out rows = {fid:.4} (min 0.99), detector F1 {f1:.3}, {}",
            test.n_rows(),
            secs(elapsed)
        ),
    );
}

fn run(toml: &str, out: &Path, parallel: usize) -> RunOutcome {
    let config = ExperimentConfig::from_toml_str(toml).unwrap();
    run_config(&config, out, parallel).unwrap()
}

fn parallelism() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn top3_criterion(report: &mut Report, out: &Path) {
    let start = Instant::now();
    let outcome = run(
        &format!(
            r#"
seed = {MASTER_SEED}
[data.synthetic]
n_rows = 2000
bias_strength = 0.9
[experiment]
kind = "top3"
explainers = ["lime", "shap"]
n_explain = 100
"#
        ),
        out,
        1,
    );
    let elapsed = start.elapsed();
    let top3 = outcome.top3.as_ref().unwrap();
    let m = &outcome.manifest;
    let f1 = |mode: &str| {
        m.scaffolds
            .iter()
            .find(|s| s.detector_mode.as_str() == mode)
            .map(|s| s.heldout_f1)
            .unwrap()
    };
    let mut pass = elapsed <= Duration::from_secs(600);
    let mut parts = Vec::new();
    for tag in [ExplainerTag::Lime, ExplainerTag::Shap] {
        let biased = top3.cell("biased", tag).unwrap().fraction("sensitive").unwrap();
        let sc = top3.cell("scaffold", tag).unwrap();
        let sens = sc.fraction("sensitive").unwrap();
        let unrel = sc.fraction("unrelated_1").unwrap();
        let det_f1 = f1(tag.as_str());
        pass &= biased >= 0.95 && det_f1 >= 0.9 && sens <= 0.2 && unrel >= 0.8;
        parts.push(format!(
            "{tag}: biased sensitive {biased:.2} (min 0.95); scaffold detector F1 {det_f1:.3} (min 0.9), sensitive {sens:.2} (max 0.20), unrelated_1 {unrel:.2} (min 0.80)"
        ));
    }
    parts.push(secs(elapsed));
    report.record(5, "bias concealment", pass, parts.join("; "));
}

fn sweep_criteria(report: &mut Report, out: &Path) {
    let start = Instant::now();
    let outcome = run(
        &format!(
            r#"
seed = {MASTER_SEED}
[data.synthetic]
n_rows = 2000
bias_strength = 0.9
[experiment]
kind = "sweep"
explainers = ["lime", "shap", "shlime"]
f1_targets = [0.5, 0.6, 0.7, 0.8, 0.9]
n_explain = 100
tolerance = 0.02
"#
        ),
        out,
        parallelism(),
    );
    let elapsed = start.elapsed();
    let sweep = outcome.sweep.as_ref().unwrap();
    let rates = |tag| -> Vec<f64> { sweep.rates(tag).into_iter().map(|r| r.unwrap_or(f64::NAN)).collect() };
    let (lime, shap, shlime) = (rates(ExplainerTag::Lime), rates(ExplainerTag::Shap), rates(ExplainerTag::Shlime));
    let targets = &sweep.f1_targets;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join("/");

    let lime_collapse = lime[0] - lime[4];
    let shap_drop = shap[0] - shap[4];
    let shap_step = shap.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
    let low_ok = targets
        .iter()
        .zip(&shlime)
        .filter(|(t, _)| **t <= 0.7)
        .all(|(_, r)| *r >= 0.8);
    let floor_ok = (0..targets.len()).all(|i| shlime[i] >= lime[i].min(shap[i]) - 0.1);
    let a = lime_collapse >= 0.4;
    let b = shap_drop >= 0.2 && shap_step <= lime_collapse;
    let c = low_ok && floor_ok;
    report.record(
        6,
        "sensitivity shapes",
        a && b && c && elapsed <= Duration::from_secs(1800),
        format!(
            "targets {}; lime {} (a: drop {lime_collapse:.2} >= 0.4 {}); shap {} (b: drop {shap_drop:.2} >= 0.2, largest step {shap_step:.2} <= {lime_collapse:.2} {}); shlime {} (c: {}); {}",
            fmt(targets),
            fmt(&lime),
            ok(a),
            fmt(&shap),
            ok(b),
            fmt(&shlime),
            ok(c),
            secs(elapsed)
        ),
    );

    let misses: Vec<String> = outcome
        .manifest
        .achieved
        .iter()
        .filter(|a| a.f1_achieved.is_none_or(|f| (f - a.f1_target).abs() > 0.02))
        .map(|a| format!("{}@{}", a.explainer, a.f1_target))
        .collect();
    let worst = outcome
        .manifest
        .achieved
        .iter()
        .filter_map(|a| a.f1_achieved.map(|f| (f - a.f1_target).abs()))
        .fold(0.0, f64::max);
    report.record(
        8,
        "F1 calibration",
        misses.is_empty() && outcome.manifest.achieved.len() == 15,
        format!(
            "{} cells, max |achieved - target| = {worst:.4} (tol 0.02), misses: [{}]",
            outcome.manifest.achieved.len(),
            misses.join(", ")
        ),
    );
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "violated"
    }
}

fn pca_criterion(report: &mut Report, out: &Path) {
    let outcome = run(
        &format!(
            r#"
seed = {MASTER_SEED}
[data.synthetic]
n_rows = 2000
bias_strength = 0.9
[experiment]
kind = "pca"
mode = "lime"
"#
        ),
        out,
        1,
    );
    let acc = outcome.manifest.metrics["pca_logistic_accuracy"];
    let base = outcome.manifest.metrics["pca_majority_baseline"];
    report.record(
        7,
        "PCA separability",
        acc >= 0.85,
        format!("held-out logistic accuracy on 2 components = {acc:.4} (min 0.85), majority baseline {base:.4}"),
    );
}

fn reproducibility_criterion(report: &mut Report, root: &Path) {
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for (dir, files) in [
        ("top3", &["top3.csv", "attributions_top3.csv"][..]),
        ("pca", &["pca.csv", "pca_meta.csv"][..]),
    ] {
        let first = root.join(dir);
        let again = root.join(format!("{dir}_rerun"));
        let config = ExperimentConfig::load(first.join("manifest.toml")).unwrap();
        run_config(&config, &again, 1).unwrap();
        for f in files {
            compared += 1;
            if fs::read(first.join(f)).unwrap() != fs::read(again.join(f)).unwrap() {
                mismatches.push(format!("{dir}/{f}"));
            }
        }
    }
    report.record(
        9,
        "reproducibility",
        mismatches.is_empty(),
        format!(
            "{compared} result files rerun from emitted manifests, byte mismatches: [{}]",
            mismatches.join(", ")
        ),
    );
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut report = Report {
        lines: Vec::new(),
        failed: 0,
    };
    shapley_criteria(&mut report);
    linear_criterion(&mut report);
    fidelity_criterion(&mut report);
    top3_criterion(&mut report, &root.join("top3"));
    sweep_criteria(&mut report, &root.join("sweep"));
    pca_criterion(&mut report, &root.join("pca"));
    reproducibility_criterion(&mut report, root);

    report.lines.sort_by_key(|l| {
        l.split("criterion ")
            .nth(1)
            .and_then(|s| s.split(' ').next())
            .and_then(|n| n.parse::<u32>().ok())
    });
    println!("\n== acceptance summary ==");
    for l in &report.lines {
        println!("{l}");
    }
    assert_eq!(report.failed, 0, "{} acceptance criteria failed", report.failed);
}
