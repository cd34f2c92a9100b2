//! Random Forest classifier: Gini-split decision trees on bootstrap samples
//! with per-node feature subsampling, majority-vote prediction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_matrix, derive_seed};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, SchemaId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestParams {
    pub n_estimators: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` means `floor(sqrt(d))`.
    pub features_per_split: Option<usize>,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        RandomForestParams {
            n_estimators: 200,
            min_samples_split: 2,
            min_samples_leaf: 1,
            features_per_split: None,
        }
    }
}

impl RandomForestParams {
    fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidConfig("n_estimators must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig(
                "min_samples_split must be >= 2".into(),
            ));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }

    fn resolved_features_per_split(&self, dim: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (dim as f64).sqrt().floor() as usize)
            .clamp(1, dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        /// Class histogram at the leaf: [normal, anomalous].
        counts: [u32; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    fn leaf_counts(&self, x: &[f64]) -> [u32; 2] {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { counts } => return *counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// This tree's vote for `x`; leaf ties go to the normal class.
    pub fn vote(&self, x: &[f64]) -> bool {
        let [neg, pos] = self.leaf_counts(x);
        pos > neg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub schema: SchemaId,
    pub params: RandomForestParams,
    pub seed: u64,
    pub trees: Vec<DecisionTree>,
    /// Out-of-bag error estimate recorded at training time, when every
    /// sample was out-of-bag for at least one tree.
    pub oob_error: Option<f64>,
}

impl RandomForestModel {
    /// Fraction of trees voting anomalous.
    pub fn probability(&self, x: &FeatureVector) -> Result<f64> {
        x.expect_schema(self.schema)?;
        Ok(self.probability_raw(&x.values))
    }

    pub(crate) fn probability_raw(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.vote(x)).count();
        votes as f64 / self.trees.len() as f64
    }

    /// Anomalous iff at least half the trees vote anomalous.
    pub fn predict(&self, x: &FeatureVector) -> Result<bool> {
        Ok(self.probability(x)? >= 0.5)
    }
}

/// Gini impurity of a two-class histogram.
fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

struct RfBuilder<'a> {
    rows: &'a [&'a [f64]],
    labels: &'a [bool],
    params: &'a RandomForestParams,
    dim: usize,
    k_features: usize,
    nodes: Vec<TreeNode>,
    // Scratch buffer reused across nodes for (value, label) sorting.
    scratch: Vec<(f64, bool)>,
}

impl<'a> RfBuilder<'a> {
    fn leaf(&mut self, indices: &[usize]) -> u32 {
        let mut counts = [0u32; 2];
        for &i in indices {
            counts[self.labels[i] as usize] += 1;
        }
        self.nodes.push(TreeNode::Leaf { counts });
        (self.nodes.len() - 1) as u32
    }

    fn build(&mut self, indices: &mut [usize], rng: &mut ChaCha8Rng) -> u32 {
        let mut counts = [0usize; 2];
        for &i in indices.iter() {
            counts[self.labels[i] as usize] += 1;
        }
        let node_gini = gini(counts);
        if indices.len() < self.params.min_samples_split
            || counts[0] == 0
            || counts[1] == 0
        {
            return self.leaf(indices);
        }

        // Features in seeded random order; constant features do not count
        // against the per-split budget, so a valid split is still found when
        // the first draws are all constant at this node.
        let mut features: Vec<usize> = (0..self.dim).collect();
        for i in (1..self.dim).rev() {
            let j = rng.random_range(0..=i);
            features.swap(i, j);
        }

        let n = indices.len() as f64;
        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, weighted gini)
        let mut splittable_seen = 0usize;
        for &f in &features {
            if splittable_seen >= self.k_features {
                break;
            }
            self.scratch.clear();
            self.scratch
                .extend(indices.iter().map(|&i| (self.rows[i][f], self.labels[i])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.scratch[0].0 == self.scratch[self.scratch.len() - 1].0 {
                continue;
            }
            splittable_seen += 1;

            let mut left = [0usize; 2];
            let mut right = counts;
            for k in 0..self.scratch.len() - 1 {
                let (v, label) = self.scratch[k];
                left[label as usize] += 1;
                right[label as usize] -= 1;
                let next_v = self.scratch[k + 1].0;
                if next_v == v {
                    continue;
                }
                let n_left = k + 1;
                let n_right = self.scratch.len() - n_left;
                if n_left < self.params.min_samples_leaf || n_right < self.params.min_samples_leaf
                {
                    continue;
                }
                let weighted =
                    (n_left as f64 * gini(left) + n_right as f64 * gini(right)) / n;
                if weighted + 1e-12 < best.map_or(node_gini, |b| b.2) {
                    best = Some((f, (v + next_v) / 2.0, weighted));
                }
            }
        }

        let Some((feature, threshold, _)) = best else {
            return self.leaf(indices);
        };

        let mut mid = 0usize;
        for i in 0..indices.len() {
            if self.rows[indices[i]][feature] <= threshold {
                indices.swap(i, mid);
                mid += 1;
            }
        }

        let placeholder = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { counts: [0, 0] });
        let (left_idx, right_idx) = indices.split_at_mut(mid);
        let left = self.build(left_idx, rng);
        let right = self.build(right_idx, rng);
        self.nodes[placeholder] = TreeNode::Split {
            feature: feature as u32,
            threshold,
            left,
            right,
        };
        placeholder as u32
    }
}

fn build_rf_tree(
    rows: &[&[f64]],
    labels: &[bool],
    params: &RandomForestParams,
    seed: u64,
) -> (DecisionTree, Vec<bool>) {
    let n = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_bag = vec![false; n];
    let mut indices: Vec<usize> = Vec::with_capacity(n);
    for _ in 0..n {
        let i = rng.random_range(0..n);
        in_bag[i] = true;
        indices.push(i);
    }
    let dim = rows[0].len();
    let mut builder = RfBuilder {
        rows,
        labels,
        params,
        dim,
        k_features: params.resolved_features_per_split(dim),
        nodes: Vec::new(),
        scratch: Vec::new(),
    };
    builder.build(&mut indices, &mut rng);
    (
        DecisionTree {
            nodes: builder.nodes,
        },
        in_bag,
    )
}

/// Train a random forest on labeled feature vectors. Both classes must be
/// present. Deterministic given `seed`; trees build in parallel from derived
/// per-tree seeds.
pub fn train_random_forest(
    xs: &[FeatureVector],
    ys: &[bool],
    params: &RandomForestParams,
    seed: u64,
) -> Result<RandomForestModel> {
    params.validate()?;
    let (schema, rows) = check_matrix(xs)?;
    if rows.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "feature/label length mismatch: {} vs {}",
            rows.len(),
            ys.len()
        )));
    }
    if !ys.contains(&true) || !ys.contains(&false) {
        return Err(Error::Training(
            "random forest requires both classes in the training labels".into(),
        ));
    }

    let built: Vec<(DecisionTree, Vec<bool>)> = (0..params.n_estimators)
        .into_par_iter()
        .map(|i| build_rf_tree(&rows, ys, params, derive_seed(seed, i as u64)))
        .collect();

    // Out-of-bag votes, aggregated in tree order for determinism.
    let mut oob_votes: Vec<[u32; 2]> = vec![[0, 0]; rows.len()];
    for (tree, in_bag) in &built {
        for (i, bagged) in in_bag.iter().enumerate() {
            if !bagged {
                oob_votes[i][tree.vote(rows[i]) as usize] += 1;
            }
        }
    }
    let mut evaluated = 0usize;
    let mut wrong = 0usize;
    for (votes, &label) in oob_votes.iter().zip(ys) {
        let total = votes[0] + votes[1];
        if total == 0 {
            continue;
        }
        evaluated += 1;
        let predicted = votes[1] as f64 / f64::from(total) >= 0.5;
        if predicted != label {
            wrong += 1;
        }
    }
    let oob_error = if evaluated == rows.len() {
        Some(wrong as f64 / evaluated as f64)
    } else {
        None
    };

    Ok(RandomForestModel {
        schema,
        params: params.clone(),
        seed,
        trees: built.into_iter().map(|(t, _)| t).collect(),
        oob_error,
    })
}

/// Predict `(label, anomaly probability)` for one vector.
pub fn rf_predict(model: &RandomForestModel, x: &FeatureVector) -> Result<(bool, f64)> {
    let p = model.probability(x)?;
    Ok((p >= 0.5, p))
}
