//! Isolation Forest: anomalies are isolated by recursive random axis-aligned
//! partitioning; points with short average isolation paths score high.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{average_path_length, check_matrix, derive_seed};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, SchemaId};

/// How the continuous anomaly score is turned into a binary decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum ThresholdRule {
    /// Flag scores strictly above a fixed cutoff. 0.5 is the conventional
    /// choice: it corresponds to an average path length equal to that of an
    /// average point.
    Fixed(f64),
    /// Flag scores above the `(1 - contamination)` quantile of the training
    /// scores, so roughly `contamination` of the training set is flagged.
    Contamination(f64),
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Fixed(0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestParams {
    pub n_estimators: usize,
    /// Subsample size per tree, as a fraction of the training set.
    pub max_samples: f64,
    pub threshold: ThresholdRule,
}

impl Default for IsolationForestParams {
    fn default() -> Self {
        IsolationForestParams {
            n_estimators: 200,
            max_samples: 0.005,
            threshold: ThresholdRule::default(),
        }
    }
}

impl IsolationForestParams {
    /// Subsample size for a training set of `n` rows: `max(2, round(max_samples * n))`.
    pub fn subsample_size(&self, n: usize) -> usize {
        ((self.max_samples * n as f64).round() as usize).clamp(2, n.max(2))
    }

    fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidConfig("n_estimators must be >= 1".into()));
        }
        if !(self.max_samples > 0.0 && self.max_samples <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "max_samples must be in (0, 1], got {}",
                self.max_samples
            )));
        }
        match self.threshold {
            ThresholdRule::Fixed(v) if !(0.0..=1.0).contains(&v) => Err(Error::InvalidConfig(
                format!("fixed threshold must be in [0, 1], got {v}"),
            )),
            ThresholdRule::Contamination(c) if !(c > 0.0 && c < 1.0) => Err(Error::InvalidConfig(
                format!("contamination must be in (0, 1), got {c}"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IsoNode {
    Split {
        feature: u32,
        value: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        size: u32,
        depth: u32,
    },
}

/// One isolation tree, nodes stored in an arena with index links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<IsoNode>,
}

impl IsolationTree {
    /// Path length of `x`: depth of the reached leaf plus `c(leaf size)`.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                IsoNode::Leaf { size, depth } => {
                    return f64::from(*depth) + average_path_length(*size as usize);
                }
                IsoNode::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    i = if x[*feature as usize] < *value {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestModel {
    pub schema: SchemaId,
    pub params: IsolationForestParams,
    pub seed: u64,
    pub subsample_size: usize,
    /// Score cutoff derived from the threshold rule at fit time.
    pub score_threshold: f64,
    pub trees: Vec<IsolationTree>,
}

impl IsolationForestModel {
    /// Continuous anomaly score in (0, 1); higher is more anomalous.
    pub fn score(&self, x: &FeatureVector) -> Result<f64> {
        x.expect_schema(self.schema)?;
        Ok(self.score_raw(&x.values))
    }

    pub(crate) fn score_raw(&self, x: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.path_length(x)).sum();
        let mean_path = total / self.trees.len() as f64;
        let c = average_path_length(self.subsample_size);
        2f64.powf(-mean_path / c)
    }

    /// Binary decision: anomalous iff score exceeds the fitted threshold.
    pub fn predict(&self, x: &FeatureVector) -> Result<bool> {
        Ok(self.score(x)? > self.score_threshold)
    }
}

struct TreeBuilder<'a> {
    rows: &'a [&'a [f64]],
    max_depth: u32,
    nodes: Vec<IsoNode>,
}

impl<'a> TreeBuilder<'a> {
    fn build(&mut self, indices: &mut [usize], depth: u32, rng: &mut ChaCha8Rng) -> u32 {
        let dim = self.rows[0].len();
        let make_leaf = |nodes: &mut Vec<IsoNode>| {
            nodes.push(IsoNode::Leaf {
                size: indices.len() as u32,
                depth,
            });
            (nodes.len() - 1) as u32
        };
        if indices.len() <= 1 || depth >= self.max_depth {
            return make_leaf(&mut self.nodes);
        }

        // Pick a feature uniformly among those that still vary at this node.
        let mut ranges: Vec<(usize, f64, f64)> = Vec::new();
        for f in 0..dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in indices.iter() {
                let v = self.rows[i][f];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > lo {
                ranges.push((f, lo, hi));
            }
        }
        if ranges.is_empty() {
            // All remaining rows identical: isolation cannot proceed.
            return make_leaf(&mut self.nodes);
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        // Split value strictly inside (lo, hi); resample the measure-zero
        // case of hitting the lower bound exactly.
        let value = loop {
            let v = rng.random_range(lo..hi);
            if v > lo {
                break v;
            }
        };

        // In-place partition: rows below the split value go left. Both sides
        // are non-empty because the split value is strictly inside the range.
        let mut mid = 0usize;
        for i in 0..indices.len() {
            if self.rows[indices[i]][feature] < value {
                indices.swap(i, mid);
                mid += 1;
            }
        }

        let placeholder = self.nodes.len();
        self.nodes.push(IsoNode::Leaf { size: 0, depth });
        let (left_idx, right_idx) = indices.split_at_mut(mid);
        let left = self.build(left_idx, depth + 1, rng);
        let right = self.build(right_idx, depth + 1, rng);
        self.nodes[placeholder] = IsoNode::Split {
            feature: feature as u32,
            value,
            left,
            right,
        };
        placeholder as u32
    }
}

fn build_tree(rows: &[&[f64]], subsample: usize, max_depth: u32, seed: u64) -> IsolationTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Uniform subsample without replacement (partial Fisher-Yates).
    let mut indices: Vec<usize> = (0..rows.len()).collect();
    for i in 0..subsample.min(rows.len()) {
        let j = rng.random_range(i..rows.len());
        indices.swap(i, j);
    }
    indices.truncate(subsample);

    let mut builder = TreeBuilder {
        rows,
        max_depth,
        nodes: Vec::new(),
    };
    builder.build(&mut indices, 0, &mut rng);
    IsolationTree {
        nodes: builder.nodes,
    }
}

/// Train an isolation forest. Deterministic given `seed`; trees are grown in
/// parallel from per-tree seeds derived from the master seed.
pub fn train_isolation_forest(
    xs: &[FeatureVector],
    params: &IsolationForestParams,
    seed: u64,
) -> Result<IsolationForestModel> {
    params.validate()?;
    let (schema, rows) = check_matrix(xs)?;
    if rows.len() < 2 {
        return Err(Error::InvalidInput(
            "isolation forest needs at least 2 training rows".into(),
        ));
    }
    let subsample = params.subsample_size(rows.len());
    let max_depth = (subsample as f64).log2().ceil() as u32;

    let trees: Vec<IsolationTree> = (0..params.n_estimators)
        .into_par_iter()
        .map(|i| build_tree(&rows, subsample, max_depth, derive_seed(seed, i as u64)))
        .collect();

    let mut model = IsolationForestModel {
        schema,
        params: params.clone(),
        seed,
        subsample_size: subsample,
        score_threshold: 0.5,
        trees,
    };
    model.score_threshold = match params.threshold {
        ThresholdRule::Fixed(v) => v,
        ThresholdRule::Contamination(c) => {
            let mut scores: Vec<f64> = rows.iter().map(|r| model.score_raw(r)).collect();
            scores.sort_by(|a, b| a.total_cmp(b));
            // (1 - c) quantile by nearest rank.
            let rank = (((1.0 - c) * scores.len() as f64).ceil() as usize)
                .clamp(1, scores.len());
            scores[rank - 1]
        }
    };
    Ok(model)
}

/// Continuous anomaly score of `x` under a trained model.
pub fn if_score(model: &IsolationForestModel, x: &FeatureVector) -> Result<f64> {
    model.score(x)
}
