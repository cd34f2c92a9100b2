//! Unified detector interface and model persistence.
//!
//! A [`DetectorModel`] bundles one trained detector with the scaler that was
//! fitted for it (neural detectors standardize their inputs; tree detectors
//! consume raw features) and the decision threshold fitted at training time.
//! Models serialize to a versioned, self-describing JSON envelope with a
//! checksum over the payload; loading verifies format, version and checksum
//! before deserializing, and the embedded kind tag guards against loading a
//! model as the wrong detector.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Scaler, SchemaId};
use crate::forest::{
    train_isolation_forest, train_random_forest, IsolationForestModel, IsolationForestParams,
    RandomForestModel, RandomForestParams,
};
use crate::neural::{
    train_ae1svm, train_autoencoder, Ae1SvmModel, AutoEncoderModel, MlpParams, OneClassSvmParams,
};

pub const MODEL_FORMAT: &str = "kpisentry-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    IsolationForest,
    RandomForest,
    AutoEncoder,
    Ae1Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::IsolationForest,
        ModelKind::RandomForest,
        ModelKind::AutoEncoder,
        ModelKind::Ae1Svm,
    ];

    /// Whether training consumes labels.
    pub fn is_supervised(self) -> bool {
        matches!(self, ModelKind::RandomForest)
    }

    /// Whether inputs are standardized before training and scoring.
    pub fn standardizes(self) -> bool {
        matches!(self, ModelKind::AutoEncoder | ModelKind::Ae1Svm)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::IsolationForest => "isolation-forest",
            ModelKind::RandomForest => "random-forest",
            ModelKind::AutoEncoder => "autoencoder",
            ModelKind::Ae1Svm => "ae-1svm",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isolation-forest" => Ok(ModelKind::IsolationForest),
            "random-forest" => Ok(ModelKind::RandomForest),
            "autoencoder" => Ok(ModelKind::AutoEncoder),
            "ae-1svm" => Ok(ModelKind::Ae1Svm),
            other => Err(Error::InvalidConfig(format!(
                "unknown model kind '{other}' (expected isolation-forest, random-forest, autoencoder or ae-1svm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DetectorInner {
    IsolationForest(IsolationForestModel),
    RandomForest(RandomForestModel),
    AutoEncoder(AutoEncoderModel),
    Ae1Svm(Ae1SvmModel),
}

/// One trained detector plus its input scaler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub inner: DetectorInner,
    pub scaler: Option<Scaler>,
}

impl DetectorModel {
    pub fn kind(&self) -> ModelKind {
        match &self.inner {
            DetectorInner::IsolationForest(_) => ModelKind::IsolationForest,
            DetectorInner::RandomForest(_) => ModelKind::RandomForest,
            DetectorInner::AutoEncoder(_) => ModelKind::AutoEncoder,
            DetectorInner::Ae1Svm(_) => ModelKind::Ae1Svm,
        }
    }

    pub fn schema(&self) -> SchemaId {
        match &self.inner {
            DetectorInner::IsolationForest(m) => m.schema,
            DetectorInner::RandomForest(m) => m.schema,
            DetectorInner::AutoEncoder(m) => m.schema,
            DetectorInner::Ae1Svm(m) => m.encoder.schema,
        }
    }

    pub fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind() == kind {
            Ok(())
        } else {
            Err(Error::ModelFormat(format!(
                "model kind mismatch: file holds {}, expected {kind}",
                self.kind()
            )))
        }
    }

    fn scaled(&self, x: &FeatureVector) -> Result<FeatureVector> {
        match &self.scaler {
            Some(s) => s.apply(x),
            None => Ok(x.clone()),
        }
    }

    /// Continuous anomaly score, oriented so that higher means more
    /// anomalous regardless of detector kind (the hybrid's signed decision
    /// value is negated).
    pub fn anomaly_score(&self, x: &FeatureVector) -> Result<f64> {
        let x = self.scaled(x)?;
        match &self.inner {
            DetectorInner::IsolationForest(m) => m.score(&x),
            DetectorInner::RandomForest(m) => m.probability(&x),
            DetectorInner::AutoEncoder(m) => m.reconstruction_error(&x),
            DetectorInner::Ae1Svm(m) => Ok(-m.score(&x)?),
        }
    }

    /// Binary decision using the threshold fitted at training time.
    pub fn predict(&self, x: &FeatureVector) -> Result<bool> {
        let x = self.scaled(x)?;
        match &self.inner {
            DetectorInner::IsolationForest(m) => m.predict(&x),
            DetectorInner::RandomForest(m) => m.predict(&x),
            DetectorInner::AutoEncoder(m) => m.predict(&x),
            DetectorInner::Ae1Svm(m) => m.predict(&x),
        }
    }
}

/// Fully resolved training specification for one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DetectorSpec {
    IsolationForest {
        params: IsolationForestParams,
        seed: u64,
    },
    RandomForest {
        params: RandomForestParams,
        seed: u64,
    },
    AutoEncoder {
        mlp: MlpParams,
        /// Fraction of training errors above the fitted threshold.
        contamination: f64,
    },
    Ae1Svm {
        mlp: MlpParams,
        svm: OneClassSvmParams,
        seed: u64,
        /// When set, the decision cutoff is the contamination quantile of
        /// the training decision values instead of the hypersphere sign.
        contamination: Option<f64>,
    },
}

impl DetectorSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            DetectorSpec::IsolationForest { .. } => ModelKind::IsolationForest,
            DetectorSpec::RandomForest { .. } => ModelKind::RandomForest,
            DetectorSpec::AutoEncoder { .. } => ModelKind::AutoEncoder,
            DetectorSpec::Ae1Svm { .. } => ModelKind::Ae1Svm,
        }
    }
}

/// Fraction of `true` labels; the conventional contamination estimate when
/// training labels exist.
pub fn anomaly_rate(ys: &[bool]) -> f64 {
    if ys.is_empty() {
        return 0.0;
    }
    ys.iter().filter(|y| **y).count() as f64 / ys.len() as f64
}

/// Train one detector on raw (unscaled) feature vectors.
///
/// Labels are mandatory for the random forest and unused by the rest;
/// unsupervised thresholds are resolved inside the spec before calling.
pub fn train_detector(
    spec: &DetectorSpec,
    xs: &[FeatureVector],
    ys: Option<&[bool]>,
) -> Result<DetectorModel> {
    match spec {
        DetectorSpec::IsolationForest { params, seed } => {
            let inner = train_isolation_forest(xs, params, *seed)?;
            Ok(DetectorModel {
                inner: DetectorInner::IsolationForest(inner),
                scaler: None,
            })
        }
        DetectorSpec::RandomForest { params, seed } => {
            let ys = ys.ok_or_else(|| {
                Error::Training("random forest training requires labels".into())
            })?;
            let inner = train_random_forest(xs, ys, params, *seed)?;
            Ok(DetectorModel {
                inner: DetectorInner::RandomForest(inner),
                scaler: None,
            })
        }
        DetectorSpec::AutoEncoder { mlp, contamination } => {
            if !(*contamination > 0.0 && *contamination < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "autoencoder contamination must be in (0, 1), got {contamination}"
                )));
            }
            let scaler = Scaler::fit(xs)?;
            let scaled = scaler.apply_all(xs)?;
            let mut inner = train_autoencoder(&scaled, mlp)?;
            let mut errors: Vec<f64> = scaled
                .iter()
                .map(|x| inner.reconstruction_error(x))
                .collect::<Result<_>>()?;
            errors.sort_by(|a, b| a.total_cmp(b));
            let rank = (((1.0 - contamination) * errors.len() as f64).ceil() as usize)
                .clamp(1, errors.len());
            inner.error_threshold = errors[rank - 1];
            Ok(DetectorModel {
                inner: DetectorInner::AutoEncoder(inner),
                scaler: Some(scaler),
            })
        }
        DetectorSpec::Ae1Svm {
            mlp,
            svm,
            seed,
            contamination,
        } => {
            let scaler = Scaler::fit(xs)?;
            let scaled = scaler.apply_all(xs)?;
            let mut inner = train_ae1svm(&scaled, mlp, svm, *seed)?;
            if let Some(c) = contamination {
                if !(*c > 0.0 && *c < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "ae-1svm contamination must be in (0, 1), got {c}"
                    )));
                }
                // Flag the lowest `c` fraction of training decision values.
                let mut decisions: Vec<f64> = scaled
                    .iter()
                    .map(|x| inner.score(x))
                    .collect::<Result<_>>()?;
                decisions.sort_by(|a, b| a.total_cmp(b));
                let rank = ((c * decisions.len() as f64).ceil() as usize)
                    .clamp(1, decisions.len());
                inner.decision_threshold = decisions[rank - 1];
            }
            Ok(DetectorModel {
                inner: DetectorInner::Ae1Svm(inner),
                scaler: Some(scaler),
            })
        }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Canonical payload bytes: JSON with object keys sorted (serde_json::Value
/// maps are ordered), so the checksum does not depend on struct field order.
fn canonical_bytes(payload: &serde_json::Value) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec(payload)?)
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    checksum: String,
    payload: serde_json::Value,
}

/// Serialize a model to the versioned JSON envelope.
pub fn model_to_json(model: &DetectorModel) -> Result<String> {
    let payload = serde_json::to_value(model)?;
    let checksum = format!("{:016x}", fnv1a64(&canonical_bytes(&payload)?));
    let envelope = Envelope {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        checksum,
        payload,
    };
    Ok(serde_json::to_string(&envelope)?)
}

/// Parse a model from the JSON envelope, verifying format, version and
/// checksum.
pub fn model_from_json(text: &str) -> Result<DetectorModel> {
    let envelope: Envelope = serde_json::from_str(text)
        .map_err(|e| Error::ModelFormat(format!("not a model file: {e}")))?;
    if envelope.format != MODEL_FORMAT {
        return Err(Error::ModelFormat(format!(
            "unexpected format tag '{}'",
            envelope.format
        )));
    }
    if envelope.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported model version {} (this build reads {MODEL_VERSION})",
            envelope.version
        )));
    }
    let checksum = format!("{:016x}", fnv1a64(&canonical_bytes(&envelope.payload)?));
    if checksum != envelope.checksum {
        return Err(Error::ModelFormat(format!(
            "checksum mismatch: file says {}, payload hashes to {checksum}",
            envelope.checksum
        )));
    }
    Ok(serde_json::from_value(envelope.payload)
        .map_err(|e| Error::ModelFormat(format!("malformed payload: {e}")))?)
}

pub fn save_model(path: impl AsRef<Path>, model: &DetectorModel) -> Result<()> {
    std::fs::write(path.as_ref(), model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DetectorModel> {
    let text = std::fs::read_to_string(path.as_ref())?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SchemaId;
    use crate::forest::ThresholdRule;
    use crate::neural::Activation;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_data(n: usize, seed: u64) -> (Vec<FeatureVector>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let anomalous = i % 5 == 0;
            let base = if anomalous { 4.0 } else { 0.0 };
            xs.push(
                FeatureVector::new(
                    SchemaId::PerNeighbor,
                    vec![
                        base + rng.random_range(-0.5..0.5),
                        rng.random_range(-0.5..0.5),
                        base * 0.5 + rng.random_range(-0.5..0.5),
                    ],
                )
                .unwrap(),
            );
            ys.push(anomalous);
        }
        (xs, ys)
    }

    fn all_specs() -> Vec<DetectorSpec> {
        let mlp = MlpParams {
            hidden: vec![4, 2, 4],
            activation: Activation::Tanh,
            dropout_rate: 0.0,
            epochs: 20,
            batch_size: 8,
            learning_rate: 0.01,
            seed: 5,
        };
        vec![
            DetectorSpec::IsolationForest {
                params: IsolationForestParams {
                    n_estimators: 40,
                    max_samples: 0.3,
                    threshold: ThresholdRule::Fixed(0.5),
                },
                seed: 1,
            },
            DetectorSpec::RandomForest {
                params: RandomForestParams {
                    n_estimators: 20,
                    ..RandomForestParams::default()
                },
                seed: 2,
            },
            DetectorSpec::AutoEncoder {
                mlp: mlp.clone(),
                contamination: 0.2,
            },
            DetectorSpec::Ae1Svm {
                mlp,
                svm: OneClassSvmParams::default(),
                seed: 3,
                contamination: None,
            },
        ]
    }

    #[test]
    fn roundtrip_reproduces_scores_bit_exactly() {
        let (xs, ys) = toy_data(120, 7);
        let (probes, _) = toy_data(100, 99);
        for spec in all_specs() {
            let model = train_detector(&spec, &xs, Some(&ys)).unwrap();
            let json = model_to_json(&model).unwrap();
            let back = model_from_json(&json).unwrap();
            assert_eq!(model, back, "{:?} roundtrip equality", spec.kind());
            for p in &probes {
                let a = model.anomaly_score(p).unwrap();
                let b = back.anomaly_score(p).unwrap();
                assert!(
                    a.to_bits() == b.to_bits(),
                    "{:?}: score {a} != {b}",
                    spec.kind()
                );
                assert_eq!(model.predict(p).unwrap(), back.predict(p).unwrap());
            }
        }
    }

    #[test]
    fn truncated_file_is_an_error_not_a_crash() {
        let (xs, ys) = toy_data(60, 3);
        let model = train_detector(&all_specs()[0], &xs, Some(&ys)).unwrap();
        let json = model_to_json(&model).unwrap();
        let truncated = &json[..json.len() / 2];
        assert!(matches!(
            model_from_json(truncated),
            Err(Error::ModelFormat(_))
        ));
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let (xs, ys) = toy_data(60, 4);
        let model = train_detector(&all_specs()[1], &xs, Some(&ys)).unwrap();
        let json = model_to_json(&model).unwrap();
        // Corrupt one digit inside the payload, keeping valid JSON.
        let corrupted = json.replacen("\"seed\":2", "\"seed\":3", 1);
        assert_ne!(json, corrupted, "corruption should apply");
        match model_from_json(&corrupted) {
            Err(Error::ModelFormat(msg)) => assert!(msg.contains("checksum"), "{msg}"),
            other => panic!("expected checksum failure, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let (xs, ys) = toy_data(60, 5);
        let model = train_detector(&all_specs()[0], &xs, Some(&ys)).unwrap();
        let json = model_to_json(&model).unwrap();
        let bumped = json.replacen("\"version\":1", "\"version\":9", 1);
        match model_from_json(&bumped) {
            Err(Error::ModelFormat(msg)) => assert!(msg.contains("version"), "{msg}"),
            other => panic!("expected version failure, got {other:?}"),
        }
    }

    #[test]
    fn kind_tag_guards_cross_kind_use() {
        let (xs, ys) = toy_data(60, 6);
        let model = train_detector(&all_specs()[0], &xs, Some(&ys)).unwrap();
        assert!(model.expect_kind(ModelKind::IsolationForest).is_ok());
        assert!(model.expect_kind(ModelKind::RandomForest).is_err());
    }

    #[test]
    fn autoencoder_threshold_matches_quantile_oracle() {
        let (xs, ys) = toy_data(100, 8);
        let contamination = 0.25;
        let spec = DetectorSpec::AutoEncoder {
            mlp: MlpParams {
                hidden: vec![2],
                activation: Activation::Relu,
                dropout_rate: 0.0,
                epochs: 10,
                batch_size: 10,
                learning_rate: 0.01,
                seed: 9,
            },
            contamination,
        };
        let model = train_detector(&spec, &xs, Some(&ys)).unwrap();
        // Independent quantile recomputation.
        let mut errors: Vec<f64> = xs
            .iter()
            .map(|x| model.anomaly_score(x).unwrap())
            .collect();
        errors.sort_by(|a, b| a.total_cmp(b));
        let rank = ((1.0 - contamination) * errors.len() as f64).ceil() as usize;
        let expected = errors[rank - 1];
        let DetectorInner::AutoEncoder(ae) = &model.inner else {
            panic!("autoencoder expected");
        };
        assert_eq!(ae.error_threshold, expected);
        // Flagged fraction does not exceed the contamination plus slack.
        let flagged = xs.iter().filter(|x| model.predict(x).unwrap()).count() as f64;
        assert!(flagged / xs.len() as f64 <= contamination + 1.0 / xs.len() as f64);
    }

    #[test]
    fn supervised_training_requires_labels() {
        let (xs, _) = toy_data(40, 2);
        assert!(train_detector(&all_specs()[1], &xs, None).is_err());
    }

    #[test]
    fn anomaly_rate_counts_true_fraction() {
        assert_eq!(anomaly_rate(&[true, false, false, true]), 0.5);
        assert_eq!(anomaly_rate(&[]), 0.0);
    }
}
