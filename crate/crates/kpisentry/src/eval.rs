//! Confusion-matrix metrics and F1-driven hyperparameter grid search.
//!
//! The anomalous class is the positive class. Zero-denominator conventions:
//! precision, recall and F1 are all defined as 0 when their denominator is 0,
//! which keeps the macro average total. Grid search only ever sees training
//! data: supervised configurations are scored by 3-fold cross-validation
//! inside the training set, unsupervised ones train on the full training set
//! and are scored against the training labels.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::model::{train_detector, DetectorModel, DetectorSpec, ModelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.true_positive += 1,
            (true, false) => self.false_positive += 1,
            (false, true) => self.false_negative += 1,
            (false, false) => self.true_negative += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub precision_pos: f64,
    pub recall_pos: f64,
    pub precision_neg: f64,
    pub recall_neg: f64,
    pub f1_pos: f64,
    pub f1_neg: f64,
    /// Unweighted mean of the two per-class F1 scores.
    pub f1_macro: f64,
    pub accuracy: f64,
}

fn ratio(num: u64, denom: u64) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Derive all report metrics from a confusion matrix.
pub fn metrics(cm: &ConfusionMatrix) -> Result<EvalReport> {
    if cm.total() == 0 {
        return Err(Error::InvalidInput(
            "confusion matrix holds no observations".into(),
        ));
    }
    let precision_pos = ratio(cm.true_positive, cm.true_positive + cm.false_positive);
    let recall_pos = ratio(cm.true_positive, cm.true_positive + cm.false_negative);
    let precision_neg = ratio(cm.true_negative, cm.true_negative + cm.false_negative);
    let recall_neg = ratio(cm.true_negative, cm.true_negative + cm.false_positive);
    let f1_pos = f1(precision_pos, recall_pos);
    let f1_neg = f1(precision_neg, recall_neg);
    Ok(EvalReport {
        confusion: *cm,
        precision_pos,
        recall_pos,
        precision_neg,
        recall_neg,
        f1_pos,
        f1_neg,
        f1_macro: (f1_pos + f1_neg) / 2.0,
        accuracy: ratio(cm.true_positive + cm.true_negative, cm.total()),
    })
}

/// Score a trained detector against labeled vectors.
pub fn evaluate(model: &DetectorModel, xs: &[FeatureVector], ys: &[bool]) -> Result<EvalReport> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "feature/label length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (x, y) in xs.iter().zip(ys) {
        cm.record(model.predict(x)?, *y);
    }
    metrics(&cm)
}

/// Render reports as an aligned plain-text table (model, precision and
/// recall for anomalies, macro F1, accuracy).
pub fn report_table(rows: &[(String, EvalReport)]) -> String {
    let mut out = String::new();
    let name_width = rows
        .iter()
        .map(|(n, _)| n.len())
        .chain(["Model".len()])
        .max()
        .unwrap_or(5);
    out.push_str(&format!(
        "{:<name_width$}  Precision (1)  Recall (1)  F1-Score  Accuracy\n",
        "Model"
    ));
    for (name, r) in rows {
        out.push_str(&format!(
            "{:<name_width$}  {:>13.2}  {:>10.2}  {:>8.2}  {:>7.0}%\n",
            name,
            r.precision_pos,
            r.recall_pos,
            r.f1_macro,
            r.accuracy * 100.0
        ));
    }
    out
}

/// Hyperparameter grid: candidate values per parameter name. Names address
/// the serde fields of the detector's parameter structs (for the hybrid,
/// autoencoder and SVM fields share one namespace).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: ModelKind,
    pub grid: BTreeMap<String, Vec<serde_json::Value>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridResult {
    pub params: BTreeMap<String, serde_json::Value>,
    /// Macro F1 on training data (cross-validated for supervised kinds);
    /// absent when the configuration failed to train.
    pub f1_macro: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridOutcome {
    pub best_params: BTreeMap<String, serde_json::Value>,
    pub best_spec: DetectorSpec,
    pub best_f1_macro: f64,
    /// One entry per evaluated configuration, in deterministic
    /// (lexicographic) enumeration order.
    pub results: Vec<GridResult>,
}

/// Overlay one `name = value` assignment onto the JSON form of a spec.
/// The name must match exactly one settable field.
fn overlay(spec_value: &mut serde_json::Value, name: &str, value: &serde_json::Value) -> Result<()> {
    let obj = spec_value
        .as_object_mut()
        .expect("detector specs serialize to objects");
    let mut hits = 0usize;
    // Direct spec-level fields (e.g. contamination, seed).
    if let Some(slot) = obj.get_mut(name) {
        *slot = value.clone();
        hits += 1;
    }
    // Nested parameter blocks: params / mlp / svm.
    for block in ["params", "mlp", "svm"] {
        if let Some(serde_json::Value::Object(section)) = obj.get_mut(block) {
            if let Some(slot) = section.get_mut(name) {
                *slot = value.clone();
                hits += 1;
            }
        }
    }
    match hits {
        0 => Err(Error::InvalidConfig(format!(
            "grid parameter '{name}' does not exist on this detector"
        ))),
        1 => Ok(()),
        _ => Err(Error::InvalidConfig(format!(
            "grid parameter '{name}' is ambiguous for this detector"
        ))),
    }
}

fn apply_assignment(
    base: &DetectorSpec,
    assignment: &BTreeMap<String, serde_json::Value>,
) -> Result<DetectorSpec> {
    let mut value = serde_json::to_value(base)?;
    for (name, v) in assignment {
        overlay(&mut value, name, v)?;
    }
    Ok(serde_json::from_value(value)
        .map_err(|e| Error::InvalidConfig(format!("grid value rejected: {e}")))?)
}

/// Enumerate the cartesian product in lexicographic parameter order.
fn enumerate_grid(
    grid: &BTreeMap<String, Vec<serde_json::Value>>,
) -> Vec<BTreeMap<String, serde_json::Value>> {
    let mut assignments: Vec<BTreeMap<String, serde_json::Value>> = vec![BTreeMap::new()];
    for (name, values) in grid {
        let mut next = Vec::with_capacity(assignments.len() * values.len());
        for partial in &assignments {
            for v in values {
                let mut a = partial.clone();
                a.insert(name.clone(), v.clone());
                next.push(a);
            }
        }
        assignments = next;
    }
    assignments
}

/// Stratified fold assignment for k-fold cross-validation.
fn fold_ids(ys: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = vec![0usize; ys.len()];
    for class in [false, true] {
        let mut indices: Vec<usize> = (0..ys.len()).filter(|&i| ys[i] == class).collect();
        use rand::seq::SliceRandom;
        indices.shuffle(&mut rng);
        for (pos, idx) in indices.into_iter().enumerate() {
            ids[idx] = pos % k;
        }
    }
    ids
}

fn score_config(
    spec: &DetectorSpec,
    xs: &[FeatureVector],
    ys: &[bool],
    seed: u64,
) -> Result<f64> {
    if spec.kind().is_supervised() {
        // 3-fold stratified CV inside the training data.
        let k = 3;
        let ids = fold_ids(ys, k, seed);
        let mut total = 0.0;
        for fold in 0..k {
            let mut train_x = Vec::new();
            let mut train_y = Vec::new();
            let mut test_x = Vec::new();
            let mut test_y = Vec::new();
            for i in 0..xs.len() {
                if ids[i] == fold {
                    test_x.push(xs[i].clone());
                    test_y.push(ys[i]);
                } else {
                    train_x.push(xs[i].clone());
                    train_y.push(ys[i]);
                }
            }
            let model = train_detector(spec, &train_x, Some(&train_y))?;
            total += evaluate(&model, &test_x, &test_y)?.f1_macro;
        }
        Ok(total / k as f64)
    } else {
        let model = train_detector(spec, xs, Some(ys))?;
        Ok(evaluate(&model, xs, ys)?.f1_macro)
    }
}

/// Exhaustively evaluate a hyperparameter grid on training data and return
/// the configuration with the highest macro F1. Ties resolve to the first
/// configuration in lexicographic enumeration order. Individual training
/// failures are recorded per configuration; only a grid with no surviving
/// configuration is an error.
pub fn grid_search(
    base: &DetectorSpec,
    grid: &GridSpec,
    xs: &[FeatureVector],
    ys: &[bool],
    seed: u64,
) -> Result<GridOutcome> {
    if grid.kind != base.kind() {
        return Err(Error::InvalidConfig(format!(
            "grid kind {} does not match base spec kind {}",
            grid.kind,
            base.kind()
        )));
    }
    if grid.grid.is_empty() || grid.grid.values().any(|v| v.is_empty()) {
        return Err(Error::InvalidConfig(
            "grid must list at least one candidate value per parameter".into(),
        ));
    }

    let mut results = Vec::new();
    let mut best: Option<(usize, f64, DetectorSpec)> = None;
    for (i, assignment) in enumerate_grid(&grid.grid).into_iter().enumerate() {
        let outcome = apply_assignment(base, &assignment)
            .and_then(|spec| score_config(&spec, xs, ys, seed).map(|f| (spec, f)));
        match outcome {
            Ok((spec, f1)) => {
                if best.as_ref().is_none_or(|(_, b, _)| f1 > *b) {
                    best = Some((i, f1, spec));
                }
                results.push(GridResult {
                    params: assignment,
                    f1_macro: Some(f1),
                    error: None,
                });
            }
            Err(e) => results.push(GridResult {
                params: assignment,
                f1_macro: None,
                error: Some(e.to_string()),
            }),
        }
    }

    let Some((best_idx, best_f1, best_spec)) = best else {
        return Err(Error::Training(
            "every grid configuration failed to train".into(),
        ));
    };
    Ok(GridOutcome {
        best_params: results[best_idx].params.clone(),
        best_spec,
        best_f1_macro: best_f1,
        results,
    })
}
