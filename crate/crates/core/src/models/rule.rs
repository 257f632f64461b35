use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, FeatureSchema};
use crate::error::{Error, Result};
use crate::model::BlackBoxModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleCondition {
    Equals(f64),
    GreaterThan(f64),
}

/// A classifier that looks at exactly one feature and outputs hard 0/1
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleModel {
    pub feature_index: usize,
    pub condition: RuleCondition,
    pub positive_when_true: bool,
}

impl RuleModel {
    fn holds(&self, row: &[f64]) -> bool {
        let v = row[self.feature_index];
        match self.condition {
            RuleCondition::Equals(c) => v == c,
            RuleCondition::GreaterThan(t) => v > t,
        }
    }
}

impl BlackBoxModel for RuleModel {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        if self.holds(row) == self.positive_when_true {
            [0.0, 1.0]
        } else {
            [1.0, 0.0]
        }
    }
}

fn binary_rule(schema: &FeatureSchema, index: usize, role: &str) -> Result<RuleModel> {
    let f = &schema.features()[index];
    match f.kind {
        FeatureKind::Categorical { ref categories } if categories.len() == 2 => Ok(RuleModel {
            feature_index: index,
            condition: RuleCondition::Equals(1.0),
            positive_when_true: true,
        }),
        _ => Err(Error::Model(format!(
            "{role} feature `{}` must be binary categorical",
            f.name
        ))),
    }
}

/// Class 1 iff the sensitive feature takes code 1.
pub fn make_biased_rule(schema: &FeatureSchema) -> Result<RuleModel> {
    binary_rule(schema, schema.sensitive_index(), "sensitive")
}

/// Class 1 iff the given uncorrelated feature takes code 1.
pub fn make_unbiased_rule(schema: &FeatureSchema, which_uncorrelated: usize) -> Result<RuleModel> {
    if !schema.uncorrelated_indices().contains(&which_uncorrelated) {
        return Err(Error::Model(format!(
            "feature index {which_uncorrelated} is not declared uncorrelated"
        )));
    }
    binary_rule(schema, which_uncorrelated, "uncorrelated")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, synthetic_schema, SyntheticConfig};
    use crate::seed;
    use rand::seq::SliceRandom;

    /// Shuffle every column except `keep` across rows; predictions must not move.
    fn permutation_invariant(model: &RuleModel, keep: usize) {
        let d = generate_synthetic(&SyntheticConfig {
            n_rows: 1000,
            n_noise_features: 3,
            n_uncorrelated: 2,
            seed: 9,
            ..Default::default()
        })
        .unwrap();
        let mut rows: Vec<Vec<f64>> = d.rows().map(|r| r.to_vec()).collect();
        let before: Vec<u8> = rows.iter().map(|r| model.predict(r)).collect();
        let mut rng = seed::rng(3);
        for j in (0..d.width()).filter(|&j| j != keep) {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.shuffle(&mut rng);
            for (r, v) in rows.iter_mut().zip(col) {
                r[j] = v;
            }
        }
        let after: Vec<u8> = rows.iter().map(|r| model.predict(r)).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn biased_rule_follows_sensitive() {
        let schema = synthetic_schema(3, 2).unwrap();
        let f = make_biased_rule(&schema).unwrap();
        let s = schema.sensitive_index();
        let mut row = vec![0.0; schema.width()];
        row[s] = 1.0;
        assert_eq!(f.predict(&row), 1);
        row[s] = 0.0;
        assert_eq!(f.predict(&row), 0);
        permutation_invariant(&f, s);
    }

    #[test]
    fn unbiased_rule_follows_uncorrelated() {
        let schema = synthetic_schema(3, 2).unwrap();
        let u = schema.uncorrelated_indices()[1];
        let psi = make_unbiased_rule(&schema, u).unwrap();
        let mut row = vec![0.0; schema.width()];
        row[u] = 1.0;
        assert_eq!(psi.predict(&row), 1);
        row[u] = 0.0;
        assert_eq!(psi.predict(&row), 0);
        permutation_invariant(&psi, u);
    }

    #[test]
    fn unbiased_rule_rejects_undeclared_index() {
        let schema = synthetic_schema(3, 1).unwrap();
        assert!(make_unbiased_rule(&schema, schema.sensitive_index()).is_err());
        assert!(make_unbiased_rule(&schema, 0).is_err());
    }

    #[test]
    fn biased_rule_needs_binary_sensitive() {
        let mut feats = synthetic_schema(1, 1).unwrap().features().to_vec();
        feats[1].kind = FeatureKind::Categorical {
            categories: vec!["a".into(), "b".into(), "c".into()],
        };
        let schema = FeatureSchema::new(feats, 1, vec![2], "y").unwrap();
        assert!(make_biased_rule(&schema).is_err());
    }
}
