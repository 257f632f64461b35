use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check_trainable;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::BlackBoxModel;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestHyper {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
    /// Features tried per split, clamped to the width; `None` means
    /// `ceil(sqrt(width))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestHyper {
    fn default() -> Self {
        Self {
            n_trees: 50,
            max_depth: 10,
            seed: 0,
            max_features: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `row[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        class: u8,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub bootstrap_seed: u64,
}

impl DecisionTree {
    pub fn vote(&self, row: &[f64]) -> u8 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { class } => return class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + go(nodes, left as usize).max(go(nodes, right as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }
}

/// Bagged Gini trees; the class-1 probability is the fraction of trees
/// voting 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub hyper: ForestHyper,
}

impl BlackBoxModel for ForestModel {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let votes: usize = self.trees.iter().map(|t| t.vote(row) as usize).sum();
        let p = votes as f64 / self.trees.len() as f64;
        [1.0 - p, p]
    }
}

pub fn train_forest(train: &Dataset, hyper: &ForestHyper) -> Result<ForestModel> {
    check_trainable(train)?;
    if hyper.max_depth < 1 {
        return Err(Error::Model("max_depth must be >= 1".into()));
    }
    if hyper.n_trees < 1 {
        return Err(Error::Model("n_trees must be >= 1".into()));
    }
    let width = train.width();
    let max_features = hyper
        .max_features
        .unwrap_or_else(|| (width as f64).sqrt().ceil() as usize)
        .clamp(1, width);
    let trees = (0..hyper.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = seed::derive(hyper.seed, t as u64);
            let mut rng = seed::rng(tree_seed);
            let n = train.n_rows();
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut builder = TreeBuilder {
                data: train,
                max_depth: hyper.max_depth,
                max_features,
                min_samples_split: hyper.min_samples_split.max(2),
                rng,
                nodes: Vec::new(),
            };
            builder.grow(idx, 0);
            DecisionTree {
                nodes: builder.nodes,
                bootstrap_seed: tree_seed,
            }
        })
        .collect();
    Ok(ForestModel {
        trees,
        hyper: hyper.clone(),
    })
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    max_depth: usize,
    max_features: usize,
    min_samples_split: usize,
    rng: seed::Rng,
    nodes: Vec<TreeNode>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> u32 {
        let labels = self.data.labels();
        let pos = idx.iter().filter(|&&i| labels[i] == 1).count();
        let class = (2 * pos > idx.len()) as u8;
        self.nodes.push(TreeNode::Leaf { class });
        (self.nodes.len() - 1) as u32
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> u32 {
        let labels = self.data.labels();
        let pos = idx.iter().filter(|&&i| labels[i] == 1).count();
        if depth >= self.max_depth
            || idx.len() < self.min_samples_split
            || pos == 0
            || pos == idx.len()
        {
            return self.leaf(&idx);
        }
        let Some((feature, threshold)) = self.best_split(&idx, pos) else {
            return self.leaf(&idx);
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.data.row(i)[feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { class: 0 });
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        at as u32
    }

    fn best_split(&mut self, idx: &[usize], pos: usize) -> Option<(usize, f64)> {
        let n = idx.len();
        let parent = gini(pos, n);
        let labels = self.data.labels();
        let width = self.data.width();
        let candidates = sample(&mut self.rng, width, self.max_features).into_vec();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(n);
        for feature in candidates {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.data.row(i)[feature], labels[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0usize;
            for k in 1..n {
                left_pos += pairs[k - 1].1 as usize;
                if pairs[k].0 == pairs[k - 1].0 {
                    continue;
                }
                let impurity = (k as f64 * gini(left_pos, k)
                    + (n - k) as f64 * gini(pos - left_pos, n - k))
                    / n as f64;
                if impurity < parent - 1e-12
                    && best.is_none_or(|(b, _, _)| impurity < b)
                {
                    let threshold = 0.5 * (pairs[k - 1].0 + pairs[k].0);
                    best = Some((impurity, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}
