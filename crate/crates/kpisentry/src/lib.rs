//! Anomaly detection engine for 5G O-RAN per-UE KPI reports.
//!
//! The library implements a two-stage fault-management pipeline for O-RAN
//! deployments:
//!
//! 1. **Serving-cell anomaly detection** — flags UEs whose serving-cell KPIs
//!    (PRB usage plus radio coverage metrics) indicate imminent throughput
//!    degradation, so recovery actions such as handover can be triggered
//!    early.
//! 2. **Neighbor-cell filtering** — scores the radio coverage of each of the
//!    five reported neighbor cells and removes anomalous ones from the
//!    handover candidate set.
//!
//! Four detector families are implemented from scratch: Isolation Forest,
//! Random Forest, a feedforward AutoEncoder scored by reconstruction error,
//! and a hybrid AutoEncoder + one-class SVM operating in latent space. All
//! training is deterministic given a seed, trained models serialize to
//! self-describing JSON, and scoring is cheap enough for near-real-time RIC
//! control loops.
//!
//! The `kpisentry` binary exposes the full workflow (ingest, label, split,
//! train, evaluate, grid-search, explain, detect, filter-neighbors, bench,
//! replay) on top of this library.

pub mod bench;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod forest;
pub mod kpi;
pub mod model;
pub mod neural;
pub mod pipeline;
pub mod replay;
pub mod synth;

pub use error::{Error, Result};
