//! Model-agnostic explanations: permutation feature importance and
//! Monte-Carlo Shapley attribution.
//!
//! Both estimators work on opaque score/predict functions so one
//! implementation serves every detector kind. The Shapley estimator samples
//! feature-insertion permutations against background draws; it converges to
//! the Shapley values of the coalition value function
//! `v(S) = E_b[score(x_S combined with b outside S)]`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, SchemaId};
use crate::model::DetectorModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImportanceMethod {
    Permutation,
    Shapley,
}

/// Per-feature attribution scores in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub schema: SchemaId,
    /// `(feature name, score)`, one entry per schema feature, in order.
    pub scores: Vec<(String, f64)>,
    /// Shuffle repeats (permutation) or Monte-Carlo samples (Shapley).
    pub samples: usize,
    pub seed: u64,
}

impl ImportanceReport {
    /// Feature names ranked by descending score.
    pub fn ranking(&self) -> Vec<&str> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].1.total_cmp(&self.scores[a].1));
        order.into_iter().map(|i| self.scores[i].0.as_str()).collect()
    }

    /// CSV dump (`feature,score`), schema order, for external plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,score\n");
        for (name, score) in &self.scores {
            out.push_str(&format!("{name},{score}\n"));
        }
        out
    }
}

fn accuracy<P>(predict: &P, xs: &[FeatureVector], ys: &[bool]) -> Result<f64>
where
    P: Fn(&FeatureVector) -> Result<bool>,
{
    let mut correct = 0usize;
    for (x, y) in xs.iter().zip(ys) {
        if predict(x)? == *y {
            correct += 1;
        }
    }
    Ok(correct as f64 / xs.len() as f64)
}

/// Mean accuracy drop when one feature column is shuffled, per feature.
///
/// The baseline accuracy is computed once; each (feature, repeat) pair uses
/// an independently derived shuffle seed, so results do not depend on
/// evaluation order. A feature the model ignores scores exactly 0.
pub fn permutation_importance<P>(
    predict: P,
    xs: &[FeatureVector],
    ys: &[bool],
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport>
where
    P: Fn(&FeatureVector) -> Result<bool> + Sync,
{
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput(
            "permutation importance needs at least 2 labeled rows".into(),
        ));
    }
    if repeats == 0 {
        return Err(Error::InvalidInput("repeats must be >= 1".into()));
    }
    let schema = xs[0].schema;
    for x in xs {
        x.expect_schema(schema)?;
    }
    let baseline = accuracy(&predict, xs, ys)?;
    let d = schema.len();
    let n = xs.len();

    let mut scores = Vec::with_capacity(d);
    for (j, name) in schema.feature_names().into_iter().enumerate() {
        let mut drop_sum = 0.0;
        for r in 0..repeats {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_stream(seed, (j * repeats + r) as u64));
            let mut permuted: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let k = rng.random_range(0..=i);
                permuted.swap(i, k);
            }
            let mut shuffled = xs.to_vec();
            for (i, &src) in permuted.iter().enumerate() {
                shuffled[i].values[j] = xs[src].values[j];
            }
            drop_sum += baseline - accuracy(&predict, &shuffled, ys)?;
        }
        scores.push((name, drop_sum / repeats as f64));
    }
    Ok(ImportanceReport {
        method: ImportanceMethod::Permutation,
        schema,
        scores,
        samples: repeats,
        seed,
    })
}

/// Shapley estimate with per-feature Monte-Carlo standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyEstimate {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Standard error of the summed attribution (for efficiency checks).
    pub total_std_error: f64,
    pub samples: usize,
}

fn derive_stream(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Monte-Carlo permutation estimator of the Shapley values of `score` at
/// `x`, explained against a background population.
pub fn shapley_values<F>(
    score: F,
    x: &FeatureVector,
    background: &[FeatureVector],
    n_samples: usize,
    seed: u64,
) -> Result<ShapleyEstimate>
where
    F: Fn(&FeatureVector) -> Result<f64>,
{
    if background.is_empty() {
        return Err(Error::InvalidInput("background set is empty".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be >= 1".into()));
    }
    let schema = x.schema;
    for b in background {
        b.expect_schema(schema)?;
    }
    let d = schema.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut sums = vec![0.0; d];
    let mut sq_sums = vec![0.0; d];
    let mut total_sum = 0.0;
    let mut total_sq_sum = 0.0;
    let mut order: Vec<usize> = (0..d).collect();

    for _ in 0..n_samples {
        let b = &background[rng.random_range(0..background.len())];
        for i in (1..d).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut z = b.clone();
        let mut prev = score(&z)?;
        let mut total = 0.0;
        for &j in &order {
            z.values[j] = x.values[j];
            let val = score(&z)?;
            let marginal = val - prev;
            sums[j] += marginal;
            sq_sums[j] += marginal * marginal;
            total += marginal;
            prev = val;
        }
        total_sum += total;
        total_sq_sum += total * total;
    }

    let n = n_samples as f64;
    let values: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let std_errors: Vec<f64> = sums
        .iter()
        .zip(&sq_sums)
        .map(|(s, sq)| {
            let mean = s / n;
            ((sq / n - mean * mean).max(0.0) / n).sqrt()
        })
        .collect();
    let total_mean = total_sum / n;
    let total_std_error = ((total_sq_sum / n - total_mean * total_mean).max(0.0) / n).sqrt();
    Ok(ShapleyEstimate {
        values,
        std_errors,
        total_std_error,
        samples: n_samples,
    })
}

/// Mean absolute Shapley value per feature over a set of evaluation points.
///
/// Points are scored in parallel; each point draws from a seed derived from
/// its index, so parallel and serial runs produce identical reports.
pub fn global_importance<F>(
    score: F,
    xs: &[FeatureVector],
    background: &[FeatureVector],
    n_samples: usize,
    seed: u64,
) -> Result<ImportanceReport>
where
    F: Fn(&FeatureVector) -> Result<f64> + Sync,
{
    let Some(first) = xs.first() else {
        return Err(Error::InvalidInput("no evaluation points".into()));
    };
    let schema = first.schema;
    let per_point: Vec<Vec<f64>> = xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            shapley_values(&score, x, background, n_samples, derive_stream(seed, i as u64))
                .map(|e| e.values)
        })
        .collect::<Result<_>>()?;

    let d = schema.len();
    let mut means = vec![0.0; d];
    for point in &per_point {
        for (m, v) in means.iter_mut().zip(point) {
            *m += v.abs();
        }
    }
    for m in &mut means {
        *m /= per_point.len() as f64;
    }
    let scores = schema.feature_names().into_iter().zip(means).collect();
    Ok(ImportanceReport {
        method: ImportanceMethod::Shapley,
        schema,
        scores,
        samples: n_samples,
        seed,
    })
}

/// Continuous score function of a detector, for Shapley attribution.
pub fn model_score_fn(
    model: &DetectorModel,
) -> impl Fn(&FeatureVector) -> Result<f64> + Sync + '_ {
    move |x| model.anomaly_score(x)
}

/// Binary predictor of a detector, for permutation importance.
pub fn model_predict_fn(
    model: &DetectorModel,
) -> impl Fn(&FeatureVector) -> Result<bool> + Sync + '_ {
    move |x| model.predict(x)
}
