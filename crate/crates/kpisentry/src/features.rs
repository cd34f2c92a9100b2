//! Feature extraction and standardization.
//!
//! Extraction is deterministic and positional: every vector carries the id of
//! the schema that produced it, and detectors refuse vectors from any other
//! schema. The three schemas are
//!
//! * `ServingPlusNeighbors` (19): PRB usage, serving radio triplet, then the
//!   five neighbor triplets in report order,
//! * `NeighborsOnly` (15): the five neighbor triplets,
//! * `PerNeighbor` (3): one neighbor triplet.

use serde::{Deserialize, Serialize};

use crate::dataset::{KpiReport, NEIGHBOR_COUNT};
use crate::error::{Error, Result};

/// Stddev floor applied when fitting a scaler, so constant features scale to
/// zero instead of blowing up.
pub const STDDEV_FLOOR: f64 = 1e-8;

/// Identifier of a fixed feature ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemaId {
    ServingPlusNeighbors,
    NeighborsOnly,
    PerNeighbor,
}

impl SchemaId {
    pub fn len(self) -> usize {
        match self {
            SchemaId::ServingPlusNeighbors => 4 + 3 * NEIGHBOR_COUNT,
            SchemaId::NeighborsOnly => 3 * NEIGHBOR_COUNT,
            SchemaId::PerNeighbor => 3,
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }

    /// Feature names in vector order.
    pub fn feature_names(self) -> Vec<String> {
        let triplet = |prefix: &str| {
            vec![
                format!("{prefix}_rsrp"),
                format!("{prefix}_rssinr"),
                format!("{prefix}_rsrq"),
            ]
        };
        match self {
            SchemaId::ServingPlusNeighbors => {
                let mut names = vec!["prb_used_dl".to_string()];
                names.extend(triplet("serving"));
                for i in 1..=NEIGHBOR_COUNT {
                    names.extend(triplet(&format!("nb{i}")));
                }
                names
            }
            SchemaId::NeighborsOnly => {
                let mut names = Vec::new();
                for i in 1..=NEIGHBOR_COUNT {
                    names.extend(triplet(&format!("nb{i}")));
                }
                names
            }
            SchemaId::PerNeighbor => triplet("neighbor"),
        }
    }

    /// JSON dump of the ordered feature names, for self-describing reports.
    pub fn to_json(self) -> String {
        serde_json::json!({
            "schema": self,
            "features": self.feature_names(),
        })
        .to_string()
    }
}

impl std::fmt::Display for SchemaId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SchemaId::ServingPlusNeighbors => "serving-plus-neighbors",
            SchemaId::NeighborsOnly => "neighbors-only",
            SchemaId::PerNeighbor => "per-neighbor",
        };
        f.write_str(s)
    }
}

/// Fixed-order numeric feature vector tagged with its schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema: SchemaId,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(schema: SchemaId, values: Vec<f64>) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::SchemaMismatch {
                expected: format!("{schema} ({} values)", schema.len()),
                actual: format!("{} values", values.len()),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature value {v} in {schema} vector"
            )));
        }
        Ok(FeatureVector { schema, values })
    }

    pub fn expect_schema(&self, schema: SchemaId) -> Result<()> {
        if self.schema == schema {
            Ok(())
        } else {
            Err(Error::SchemaMismatch {
                expected: schema.to_string(),
                actual: self.schema.to_string(),
            })
        }
    }
}

/// Extract the 19-feature serving-plus-neighbors vector.
///
/// Order: `[prb_used_dl, serving rsrp, rssinr, rsrq,
/// nb1 rsrp, rssinr, rsrq, ..., nb5 rsrp, rssinr, rsrq]`.
pub fn extract_serving_plus_neighbors(report: &KpiReport) -> Result<FeatureVector> {
    report.validate()?;
    let mut values = Vec::with_capacity(SchemaId::ServingPlusNeighbors.len());
    values.push(f64::from(report.prb_used_dl));
    values.push(report.serving_radio.rsrp);
    values.push(report.serving_radio.rssinr);
    values.push(report.serving_radio.rsrq);
    for (_, t) in &report.neighbors {
        values.push(t.rsrp);
        values.push(t.rssinr);
        values.push(t.rsrq);
    }
    FeatureVector::new(SchemaId::ServingPlusNeighbors, values)
}

/// Extract the 15-feature neighbors-only vector.
pub fn extract_neighbors_only(report: &KpiReport) -> Result<FeatureVector> {
    report.validate()?;
    let mut values = Vec::with_capacity(SchemaId::NeighborsOnly.len());
    for (_, t) in &report.neighbors {
        values.push(t.rsrp);
        values.push(t.rssinr);
        values.push(t.rsrq);
    }
    FeatureVector::new(SchemaId::NeighborsOnly, values)
}

/// Extract the 3-feature triplet of neighbor `index` (0-based).
pub fn extract_per_neighbor(report: &KpiReport, index: usize) -> Result<FeatureVector> {
    if index >= NEIGHBOR_COUNT {
        return Err(Error::InvalidInput(format!(
            "neighbor index {index} out of range 0..{NEIGHBOR_COUNT}"
        )));
    }
    report.validate()?;
    let t = &report.neighbors[index].1;
    FeatureVector::new(SchemaId::PerNeighbor, vec![t.rsrp, t.rssinr, t.rsrq])
}

/// Per-feature standardizer fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub schema: SchemaId,
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

impl Scaler {
    /// Fit per-feature mean and (population) stddev, flooring the stddev.
    pub fn fit(train: &[FeatureVector]) -> Result<Self> {
        let Some(first) = train.first() else {
            return Err(Error::InvalidInput("cannot fit scaler on empty set".into()));
        };
        let schema = first.schema;
        let d = schema.len();
        for v in train {
            v.expect_schema(schema)?;
        }
        let n = train.len() as f64;
        let mut mean = vec![0.0; d];
        for v in train {
            for (m, x) in mean.iter_mut().zip(&v.values) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for v in train {
            for ((s, x), m) in var.iter_mut().zip(&v.values).zip(&mean) {
                let dlt = x - m;
                *s += dlt * dlt;
            }
        }
        let stddev = var
            .into_iter()
            .map(|s| (s / n).sqrt().max(STDDEV_FLOOR))
            .collect();
        Ok(Scaler {
            schema,
            mean,
            stddev,
        })
    }

    /// `(x - mean) / stddev`, per coordinate.
    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector> {
        v.expect_schema(self.schema)?;
        let values = v
            .values
            .iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        FeatureVector::new(self.schema, values)
    }

    pub fn apply_all(&self, vs: &[FeatureVector]) -> Result<Vec<FeatureVector>> {
        vs.iter().map(|v| self.apply(v)).collect()
    }
}
