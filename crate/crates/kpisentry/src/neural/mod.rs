//! Neural detectors: the reconstruction-error autoencoder and the hybrid
//! autoencoder + one-class SVM operating on latent codes.

mod mlp;
mod ocsvm;

pub use mlp::{train_autoencoder, Activation, AutoEncoderModel, Layer, MlpParams};
pub use ocsvm::{train_one_class_svm, OneClassSvmModel, OneClassSvmParams};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::FeatureVector;

/// Two-stage hybrid detector: the autoencoder's encoder half compresses
/// inputs to latent codes, a one-class SVM then separates anomalies there.
/// Training is sequential: the autoencoder is fitted first and frozen, the
/// SVM is fitted on the resulting latent codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ae1SvmModel {
    /// The autoencoder whose encoder half produces latent codes.
    pub encoder: AutoEncoderModel,
    pub svm: OneClassSvmModel,
    /// Decision cutoff on the signed score. 0 is the hypersphere boundary
    /// itself; fitting a contamination quantile of the training decisions
    /// moves the operating point without retraining the SVM.
    pub decision_threshold: f64,
}

impl Ae1SvmModel {
    /// Signed decision value; below the fitted threshold means anomalous
    /// (negative means outside the hypersphere).
    pub fn score(&self, x: &FeatureVector) -> Result<f64> {
        x.expect_schema(self.encoder.schema)?;
        let latent = self.encoder.encode(&x.values);
        self.svm.decision(&latent)
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<bool> {
        Ok(self.score(x)? < self.decision_threshold)
    }
}

/// Train the hybrid detector on (scaled) feature vectors.
pub fn train_ae1svm(
    xs: &[FeatureVector],
    mlp: &MlpParams,
    svm: &OneClassSvmParams,
    seed: u64,
) -> Result<Ae1SvmModel> {
    let encoder = train_autoencoder(xs, mlp)?;
    let latents: Vec<Vec<f64>> = xs.iter().map(|x| encoder.encode(&x.values)).collect();
    let svm = train_one_class_svm(&latents, svm, seed)?;
    Ok(Ae1SvmModel {
        encoder,
        svm,
        decision_threshold: 0.0,
    })
}

/// Signed hybrid score of `x`; negative means anomalous.
pub fn ae1svm_score(model: &Ae1SvmModel, x: &FeatureVector) -> Result<f64> {
    model.score(x)
}
