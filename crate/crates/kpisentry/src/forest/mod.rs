//! Tree-ensemble detectors built from scratch: unsupervised Isolation Forest
//! and supervised Random Forest.

mod isolation;
mod random;

pub use isolation::{
    if_score, train_isolation_forest, IsolationForestModel, IsolationForestParams, IsolationTree,
    ThresholdRule,
};
pub use random::{
    rf_predict, train_random_forest, DecisionTree, RandomForestModel, RandomForestParams,
};

use crate::error::Result;
use crate::features::{FeatureVector, SchemaId};

/// Average path length of an unsuccessful search in a binary search tree of
/// `n` points: `c(n) = 2 * H(n - 1) - 2 * (n - 1) / n`, with `H` the exact
/// harmonic number. `c(0) = c(1) = 0`.
pub fn average_path_length(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let harmonic: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
    2.0 * harmonic - 2.0 * (nf - 1.0) / nf
}

/// Derive an independent per-stream seed from a master seed, so parallel and
/// serial tree construction produce identical forests.
pub(crate) fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Validate that all vectors share one schema and expose them as plain rows.
pub(crate) fn check_matrix(xs: &[FeatureVector]) -> Result<(SchemaId, Vec<&[f64]>)> {
    let Some(first) = xs.first() else {
        return Err(crate::error::Error::InvalidInput(
            "empty training set".into(),
        ));
    };
    let schema = first.schema;
    let mut rows = Vec::with_capacity(xs.len());
    for x in xs {
        x.expect_schema(schema)?;
        rows.push(x.values.as_slice());
    }
    Ok((schema, rows))
}
