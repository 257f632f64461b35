//! Neighborhood samplers used by the explainers (and mimicked by the
//! attacker), and the labeled real-vs-perturbed set an OOD detector learns
//! from.

use std::collections::HashSet;
use std::sync::Arc;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::{index::sample, SliceRandom};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{fit_standardization, Dataset, FeatureStats, StandardizationStats};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    Lime,
    Shap,
}

impl PerturbMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PerturbMode::Lime => "lime",
            PerturbMode::Shap => "shap",
        }
    }
}

/// Feature-presence vector: `true` takes the origin's value, `false` the
/// background's.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoalitionMask(Vec<bool>);

impl CoalitionMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn full(m: usize) -> Self {
        Self(vec![true; m])
    }

    pub fn empty(m: usize) -> Self {
        Self(vec![false; m])
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn size(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Row with masked-in features from `origin` and the rest from `background`.
    pub fn apply(&self, origin: &[f64], background: &[f64]) -> Vec<f64> {
        self.0
            .iter()
            .zip(origin.iter().zip(background))
            .map(|(&on, (&o, &b))| if on { o } else { b })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationBatch {
    pub origin: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    /// Present for coalition (SHAP-style) batches only.
    pub masks: Option<Vec<CoalitionMask>>,
    pub seed: u64,
}

/// Gaussian noise scaled by each continuous feature's std; categoricals are
/// redrawn from their empirical frequencies with probability 1/2.
pub fn lime_perturb(
    origin: &[f64],
    stats: &StandardizationStats,
    n: usize,
    seed_: u64,
) -> Result<PerturbationBatch> {
    if n == 0 {
        return Err(Error::Perturb("sample count must be >= 1".into()));
    }
    if origin.len() != stats.width() {
        return Err(Error::Perturb(format!(
            "origin width {} does not match stats width {}",
            origin.len(),
            stats.width()
        )));
    }
    let samplers: Vec<Option<WeightedIndex<f64>>> = stats
        .features()
        .iter()
        .map(|fs| match fs {
            FeatureStats::Continuous { .. } => Ok(None),
            FeatureStats::Categorical { frequencies } => WeightedIndex::new(frequencies.iter().copied())
                .map(Some)
                .map_err(|e| Error::Perturb(format!("bad frequency table: {e}"))),
        })
        .collect::<Result<_>>()?;
    let mut rng = seed::rng(seed_);
    let rows = (0..n)
        .map(|_| {
            origin
                .iter()
                .zip(stats.features().iter().zip(&samplers))
                .map(|(&o, (fs, sampler))| match (fs, sampler) {
                    (FeatureStats::Continuous { std, .. }, _) => {
                        let eps: f64 = rng.sample(StandardNormal);
                        o + eps * std
                    }
                    (FeatureStats::Categorical { .. }, Some(w)) => {
                        if rng.random_bool(0.5) {
                            w.sample(&mut rng) as f64
                        } else {
                            o
                        }
                    }
                    (FeatureStats::Categorical { .. }, None) => unreachable!(),
                })
                .collect()
        })
        .collect();
    Ok(PerturbationBatch {
        origin: origin.to_vec(),
        rows,
        masks: None,
        seed: seed_,
    })
}

/// Draw a coalition size uniformly from `1..M`, then a uniform mask of
/// that size.
pub fn sample_mask(m: usize, rng: &mut seed::Rng) -> CoalitionMask {
    let size = rng.random_range(1..m);
    let mut bits = vec![false; m];
    for j in sample(rng, m, size) {
        bits[j] = true;
    }
    CoalitionMask(bits)
}

pub fn shap_perturb(
    origin: &[f64],
    background: &[f64],
    n: usize,
    seed_: u64,
) -> Result<PerturbationBatch> {
    let m = origin.len();
    if m < 2 {
        return Err(Error::Perturb(format!(
            "coalition sampling needs at least 2 features, got {m}"
        )));
    }
    if background.len() != m {
        return Err(Error::Perturb(format!(
            "background width {} does not match origin width {m}",
            background.len()
        )));
    }
    if n == 0 {
        return Err(Error::Perturb("sample count must be >= 1".into()));
    }
    let mut rng = seed::rng(seed_);
    let masks: Vec<CoalitionMask> = (0..n).map(|_| sample_mask(m, &mut rng)).collect();
    let rows = masks.iter().map(|z| z.apply(origin, background)).collect();
    Ok(PerturbationBatch {
        origin: origin.to_vec(),
        rows,
        masks: Some(masks),
        seed: seed_,
    })
}

fn row_key(row: &[f64]) -> Vec<u64> {
    row.iter()
        .map(|&v| if v == 0.0 { 0 } else { v.to_bits() })
        .collect()
}

/// Real rows labeled 0, `n_per_instance` perturbations of each labeled 1
/// unless they coincide exactly with some real row. SHAP-mode backgrounds
/// are real rows drawn uniformly per instance. Output order is shuffled.
pub fn build_ood_training_set(
    x: &Dataset,
    mode: PerturbMode,
    n_per_instance: usize,
    seed_: u64,
) -> Result<Dataset> {
    build_ood_training_set_with_backgrounds(x, mode, n_per_instance, None, seed_)
}

/// As [`build_ood_training_set`], but SHAP-mode backgrounds are drawn
/// uniformly from `backgrounds` when given (the reference rows the
/// explainer is expected to use).
pub fn build_ood_training_set_with_backgrounds(
    x: &Dataset,
    mode: PerturbMode,
    n_per_instance: usize,
    backgrounds: Option<&[Vec<f64>]>,
    seed_: u64,
) -> Result<Dataset> {
    if x.is_empty() {
        return Err(Error::Perturb("cannot build an OOD set from an empty dataset".into()));
    }
    if let Some(bgs) = backgrounds {
        if bgs.is_empty() {
            return Err(Error::Perturb("empty background set".into()));
        }
        if let Some(b) = bgs.iter().find(|b| b.len() != x.width()) {
            return Err(Error::Perturb(format!(
                "background width {} does not match {}",
                b.len(),
                x.width()
            )));
        }
    }
    let stats = match mode {
        PerturbMode::Lime => Some(fit_standardization(x)?),
        PerturbMode::Shap => None,
    };
    let real: HashSet<Vec<u64>> = x.rows().map(row_key).collect();
    let mut bg_rng = seed::rng(seed::derive(seed_, u64::MAX));
    let mut rows: Vec<Vec<f64>> = x.rows().map(|r| r.to_vec()).collect();
    let mut labels = vec![0u8; x.n_rows()];
    for (i, origin) in x.rows().enumerate() {
        if n_per_instance == 0 {
            break;
        }
        let s = seed::derive(seed_, i as u64);
        let batch = match mode {
            PerturbMode::Lime => lime_perturb(origin, stats.as_ref().expect("lime stats"), n_per_instance, s)?,
            PerturbMode::Shap => {
                let b = match backgrounds {
                    Some(bgs) => &bgs[bg_rng.random_range(0..bgs.len())][..],
                    None => x.row(bg_rng.random_range(0..x.n_rows())),
                };
                shap_perturb(origin, b, n_per_instance, s)?
            }
        };
        for row in batch.rows {
            labels.push(u8::from(!real.contains(&row_key(&row))));
            rows.push(row);
        }
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut seed::rng(seed_));
    let schema = Arc::new(x.schema().relabeled("is_ood")?);
    let values = order.iter().flat_map(|&i| rows[i].iter().copied()).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();
    Dataset::new(schema, values, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};
    use proptest::prelude::*;

    fn data(n: usize) -> Dataset {
        generate_synthetic(&SyntheticConfig {
            n_rows: n,
            seed: 21,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn lime_sample_mean_concentrates() {
        let d = data(200);
        let st = fit_standardization(&d).unwrap();
        let mut origin = d.row(0).to_vec();
        origin[0] = 0.0;
        let n = 20_000;
        let b = lime_perturb(&origin, &st, n, 5).unwrap();
        let std0 = match st.features()[0] {
            FeatureStats::Continuous { std, .. } => std,
            _ => unreachable!(),
        };
        let mean = b.rows.iter().map(|r| r[0] / std0).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn lime_is_reproducible() {
        let d = data(50);
        let st = fit_standardization(&d).unwrap();
        let a = lime_perturb(d.row(3), &st, 1, 99).unwrap();
        let b = lime_perturb(d.row(3), &st, 1, 99).unwrap();
        assert_eq!(a, b);
        assert!(lime_perturb(d.row(3), &st, 0, 99).is_err());
    }

    #[test]
    fn lime_degenerate_category_stays_put() {
        let d = data(50);
        let s = d.schema().sensitive_index();
        let zeroed: Vec<Vec<f64>> = d
            .rows()
            .map(|r| {
                let mut r = r.to_vec();
                r[s] = 0.0;
                r
            })
            .collect();
        let d0 = Dataset::from_rows(d.schema_arc(), &zeroed, d.labels().to_vec()).unwrap();
        let st = fit_standardization(&d0).unwrap();
        let b = lime_perturb(d0.row(0), &st, 500, 1).unwrap();
        assert!(b.rows.iter().all(|r| r[s] == 0.0));
    }

    #[test]
    fn full_and_empty_masks() {
        let o = [1.0, 2.0, 3.0];
        let bg = [7.0, 8.0, 9.0];
        assert_eq!(CoalitionMask::full(3).apply(&o, &bg), o.to_vec());
        assert_eq!(CoalitionMask::empty(3).apply(&o, &bg), bg.to_vec());
    }

    #[test]
    fn coalition_sizes_are_uniform() {
        let n = 10_000;
        let b = shap_perturb(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0], n, 17).unwrap();
        let ones = b.masks.unwrap().iter().filter(|z| z.size() == 1).count();
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn shap_needs_two_features() {
        assert!(shap_perturb(&[1.0], &[0.0], 3, 1).is_err());
        assert!(shap_perturb(&[1.0, 2.0], &[0.0], 3, 1).is_err());
    }

    #[test]
    fn ood_set_size_and_labels() {
        let d = data(100);
        let ood = build_ood_training_set(&d, PerturbMode::Lime, 5, 3).unwrap();
        assert_eq!(ood.n_rows(), 600);
        assert_eq!(ood.labels().iter().filter(|&&l| l == 0).count(), 100);
        assert_eq!(ood.schema().label_name(), "is_ood");
    }

    #[test]
    fn overlapping_perturbations_are_labeled_real() {
        // identical rows: every SHAP background equals the origin, so every
        // perturbation reproduces a real row
        let d = data(10);
        let same = d.select(&[0, 0, 0]);
        let ood = build_ood_training_set(&same, PerturbMode::Shap, 4, 3).unwrap();
        assert_eq!(ood.n_rows(), 15);
        assert!(ood.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn exact_copy_of_another_real_row_is_labeled_real() {
        // with two rows that differ in one feature, every SHAP perturbation
        // is one of the two real rows
        let d = data(10);
        let mut r1 = d.row(0).to_vec();
        r1[0] += 1.0;
        let two = Dataset::from_rows(d.schema_arc(), &[d.row(0).to_vec(), r1], vec![0, 1]).unwrap();
        let ood = build_ood_training_set(&two, PerturbMode::Shap, 20, 8).unwrap();
        assert!(ood.labels().iter().all(|&l| l == 0));
    }

    proptest! {
        #[test]
        fn shap_rows_reconstruct_from_masks(
            origin in prop::collection::vec(-5.0f64..5.0, 2..9),
            seed_ in any::<u64>(),
        ) {
            let bg: Vec<f64> = origin.iter().map(|v| v * 0.5 - 1.0).collect();
            let b = shap_perturb(&origin, &bg, 25, seed_).unwrap();
            let again = shap_perturb(&origin, &bg, 25, seed_).unwrap();
            prop_assert_eq!(&b, &again);
            for (row, z) in b.rows.iter().zip(b.masks.as_ref().unwrap()) {
                prop_assert!(z.size() >= 1 && z.size() < origin.len());
                for j in 0..origin.len() {
                    let m = if z.bits()[j] { 1.0 } else { 0.0 };
                    prop_assert_eq!(row[j], m * origin[j] + (1.0 - m) * bg[j]);
                }
            }
        }
    }
}
