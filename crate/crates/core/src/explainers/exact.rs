use super::{AttributionVector, ExplainerTag};
use crate::error::{Error, Result};
use crate::model::BlackBoxModel;

pub const EXACT_MAX_FEATURES: usize = 20;

/// Brute-force Shapley values of the game `v(S) = f(x_S, b_rest)` over all
/// `2^M` coalitions. `intercept = v(empty)`.
pub fn exact_shapley(
    model: &dyn BlackBoxModel,
    origin: &[f64],
    background: &[f64],
) -> Result<AttributionVector> {
    let m = origin.len();
    if m == 0 || m > EXACT_MAX_FEATURES {
        return Err(Error::explainer(
            "exact",
            format!("exact enumeration supports 1..={EXACT_MAX_FEATURES} features, got {m}"),
        ));
    }
    if background.len() != m {
        return Err(Error::explainer("exact", "background width mismatch"));
    }
    let n_sets = 1usize << m;
    let mut value = vec![0.0; n_sets];
    let mut row = vec![0.0; m];
    for (set, v) in value.iter_mut().enumerate() {
        for j in 0..m {
            row[j] = if set >> j & 1 == 1 { origin[j] } else { background[j] };
        }
        *v = model.positive_proba(&row);
    }
    // |S|! (M - |S| - 1)! / M!  ==  1 / (M * C(M-1, |S|))
    let mut binom = vec![1.0f64; m];
    for s in 1..m {
        binom[s] = binom[s - 1] * (m - s) as f64 / s as f64;
    }
    let coef: Vec<f64> = binom.iter().map(|c| 1.0 / (m as f64 * c)).collect();
    let mut weights = vec![0.0; m];
    for (i, phi) in weights.iter_mut().enumerate() {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for set in (0..n_sets).filter(|s| s & bit == 0) {
            let s = set.count_ones() as usize;
            acc += coef[s] * (value[set | bit] - value[set]);
        }
        *phi = acc;
    }
    Ok(AttributionVector {
        intercept: value[0],
        weights,
        tag: ExplainerTag::Exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;

    #[test]
    fn two_feature_and_game_splits_evenly() {
        // v(empty)=0, v({1})=0, v({2})=0, v({1,2})=1
        let m = FnModel(|r: &[f64]| r[0] * r[1]);
        let a = exact_shapley(&m, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(a.weights, vec![0.5, 0.5]);
        assert_eq!(a.intercept, 0.0);
    }

    #[test]
    fn constant_model_is_all_zero() {
        let m = FnModel(|_: &[f64]| 0.3);
        let a = exact_shapley(&m, &[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert!(a.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn additive_model_gets_per_feature_delta() {
        let m = FnModel(|r: &[f64]| 0.1 + 0.2 * r[0] + 0.3 * r[1].powi(2) - 0.05 * r[2]);
        let o = [1.0, 0.5, 2.0];
        let b = [0.0, -0.5, 1.0];
        let a = exact_shapley(&m, &o, &b).unwrap();
        let expect = [0.2 * 1.0, 0.0, -0.05];
        for j in 0..3 {
            assert!((a.weights[j] - expect[j]).abs() < 1e-14, "{:?}", a.weights);
        }
    }

    #[test]
    fn missing_feature_gets_exact_zero() {
        let m = FnModel(|r: &[f64]| (r[0] * r[1] + r[2]).clamp(0.0, 1.0) * 0.5);
        let a = exact_shapley(&m, &[1.0, 0.4, 0.2], &[0.0, 0.4, 0.9]).unwrap();
        assert_eq!(a.weights[1], 0.0);
    }

    /// Consistency: if model A's marginal contributions of feature 0 dominate
    /// model B's in every coalition, A's attribution to feature 0 is at least B's.
    #[test]
    fn consistency_on_paired_models() {
        let a = FnModel(|r: &[f64]| 0.1 + 0.4 * r[0] + 0.2 * r[0] * r[1]);
        let b = FnModel(|r: &[f64]| 0.1 + 0.3 * r[0] + 0.1 * r[0] * r[1] + 0.2 * r[1]);
        // contributions of feature 0: A: 0.4 / 0.6 ; B: 0.3 / 0.4
        let o = [1.0, 1.0];
        let bg = [0.0, 0.0];
        let pa = exact_shapley(&a, &o, &bg).unwrap();
        let pb = exact_shapley(&b, &o, &bg).unwrap();
        assert!(pa.weights[0] >= pb.weights[0]);
        assert!((pa.weights[0] - 0.5).abs() < 1e-15);
        assert!((pb.weights[0] - 0.35).abs() < 1e-15);
    }

    #[test]
    fn rejects_too_many_features() {
        let m = FnModel(|_: &[f64]| 0.0);
        assert!(exact_shapley(&m, &[0.0; 21], &[0.0; 21]).is_err());
    }
}
