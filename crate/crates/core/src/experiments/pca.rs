use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{fit_standardization, split, Dataset, Feature, FeatureKind, FeatureSchema, FeatureStats};
use crate::error::{Error, Result};
use crate::model::BlackBoxModel;
use crate::models::{metrics_from_predictions, train_logistic, LogisticHyper};
use crate::perturb::{lime_perturb, shap_perturb, PerturbMode};
use crate::seed;

const MAX_POWER_ITERATIONS: usize = 1000;
const CONVERGENCE_COSINE: f64 = 1.0 - 1e-14;

/// Top principal directions of a centered matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalComponents {
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Share of total variance per component.
    pub explained_variance: Vec<f64>,
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// `(pc1, pc2)` per point; real rows first, then perturbations.
    pub coords: Vec<[f64; 2]>,
    /// 0 = real, 1 = perturbed.
    pub labels: Vec<u8>,
    pub explained_variance: [f64; 2],
    pub components: [Vec<f64>; 2],
    pub mode: PerturbMode,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Flip so the largest-magnitude entry is positive (lowest index on ties).
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (j, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = j;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top-`k` eigenpairs of the covariance of already-centered `rows` by power
/// iteration with deflation.
pub fn power_components(rows: &[Vec<f64>], k: usize, seed_: u64) -> Result<PrincipalComponents> {
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    if n < 3 || d < k {
        return Err(Error::Experiment(format!(
            "PCA needs at least 3 rows and {k} columns, got {n} x {d}"
        )));
    }
    let mut cov = vec![0.0; d * d];
    for r in rows {
        for a in 0..d {
            for b in a..d {
                cov[a * d + b] += r[a] * r[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / n as f64;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    let trace: f64 = (0..d).map(|a| cov[a * d + a]).sum();
    if trace <= 0.0 {
        return Err(Error::Experiment("PCA input has zero variance".into()));
    }
    let mut rng = seed::rng(seed_);
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    let mut iterations = Vec::with_capacity(k);
    for c in 0..k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        normalize(&mut v);
        let mut lambda = 0.0;
        let mut iters = 0;
        for it in 1..=MAX_POWER_ITERATIONS {
            iters = it;
            let mut w: Vec<f64> = (0..d).map(|a| dot(&cov[a * d..(a + 1) * d], &v)).collect();
            // keep the iterate orthogonal to earlier components
            for u in &components {
                let p = dot(&w, u);
                w.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
            }
            lambda = normalize(&mut w);
            if lambda <= 1e-12 * trace {
                return Err(Error::Experiment(format!(
                    "PCA input is rank-deficient: component {} has no variance",
                    c + 1
                )));
            }
            let cos = dot(&w, &v).abs();
            v = w;
            if cos >= CONVERGENCE_COSINE {
                break;
            }
        }
        canonical_sign(&mut v);
        // deflate
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] -= lambda * v[a] * v[b];
            }
        }
        components.push(v);
        eigenvalues.push(lambda);
        iterations.push(iters);
    }
    let explained_variance = eigenvalues.iter().map(|l| (l / trace).clamp(0.0, 1.0)).collect();
    Ok(PrincipalComponents {
        components,
        eigenvalues,
        explained_variance,
        iterations,
    })
}

/// Projects real rows and `n_per_instance` perturbations of each onto the
/// top two principal components of the pooled matrix. Continuous features
/// are z-scored with the real rows' statistics, categorical codes are used
/// as is, and the pool is then mean-centered. SHAP-mode perturbations use
/// `backgrounds` in turn (a random real row per instance when empty).
pub fn run_pca(
    real: &Dataset,
    mode: PerturbMode,
    n_per_instance: usize,
    backgrounds: &[Vec<f64>],
    seed_: u64,
) -> Result<PcaProjection> {
    if real.n_rows() < 3 {
        return Err(Error::Experiment(format!("PCA needs at least 3 rows, got {}", real.n_rows())));
    }
    let stats = fit_standardization(real)?;
    let mut rows: Vec<Vec<f64>> = real.rows().map(|r| r.to_vec()).collect();
    let mut labels = vec![0u8; rows.len()];
    let mut bg_rng = seed::rng(seed::derive(seed_, u64::MAX));
    for (i, origin) in real.rows().enumerate() {
        let s = seed::derive(seed_, i as u64);
        let batch = match mode {
            PerturbMode::Lime => lime_perturb(origin, &stats, n_per_instance, s)?,
            PerturbMode::Shap => {
                let bg = if backgrounds.is_empty() {
                    real.row(bg_rng.random_range(0..real.n_rows()))
                } else {
                    &backgrounds[i % backgrounds.len()][..]
                };
                shap_perturb(origin, bg, n_per_instance, s)?
            }
        };
        labels.extend(std::iter::repeat_n(1u8, batch.rows.len()));
        rows.extend(batch.rows);
    }
    let d = real.width();
    for r in rows.iter_mut() {
        for (j, v) in r.iter_mut().enumerate() {
            if let FeatureStats::Continuous { mean, std } = stats.features()[j] {
                *v = (*v - mean) / std;
            }
        }
    }
    let n = rows.len() as f64;
    let means: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    for r in rows.iter_mut() {
        r.iter_mut().zip(&means).for_each(|(v, m)| *v -= m);
    }
    let pcs = power_components(&rows, 2, seed::derive(seed_, 0x9CA))?;
    let coords = rows
        .iter()
        .map(|r| [dot(r, &pcs.components[0]), dot(r, &pcs.components[1])])
        .collect();
    Ok(PcaProjection {
        coords,
        labels,
        explained_variance: [pcs.explained_variance[0], pcs.explained_variance[1]],
        components: [pcs.components[0].clone(), pcs.components[1].clone()],
        mode,
    })
}

/// Held-out accuracy of a logistic classifier separating real from perturbed
/// points using only the two projected coordinates. The classifier sees
/// `pc1, pc2` and their second-order terms, so it can draw the closed
/// boundary around a compact real cloud. Returns (accuracy, majority-class
/// baseline) on a 30% hold-out.
pub fn pca_separability(proj: &PcaProjection, seed_: u64) -> Result<(f64, f64)> {
    let names = ["pc1", "pc2", "pc1_sq", "pc2_sq", "pc1_pc2"];
    let schema = Arc::new(FeatureSchema::new(
        names
            .iter()
            .map(|n| Feature {
                name: n.to_string(),
                kind: FeatureKind::Continuous,
            })
            .collect(),
        0,
        vec![],
        "perturbed",
    )?);
    let values = proj
        .coords
        .iter()
        .flat_map(|&[a, b]| [a, b, a * a, b * b, a * b])
        .collect();
    let data = Dataset::new(schema, values, proj.labels.clone())?;
    let (train, test) = split(&data, 0.3, seed_)?;
    let model = train_logistic(
        &train,
        &LogisticHyper {
            learning_rate: 0.5,
            epochs: 2000,
            l2: 0.0,
        },
    )?;
    let predictions: Vec<u8> = test.rows().map(|r| model.predict(r)).collect();
    let accuracy = metrics_from_predictions(&predictions, test.labels())?.accuracy;
    let positives = test.labels().iter().filter(|&&l| l == 1).count() as f64 / test.n_rows() as f64;
    Ok((accuracy, positives.max(1.0 - positives)))
}
