//! The two deployed detection algorithms.
//!
//! Algorithm 1 watches serving-cell KPIs and raises an alert per report the
//! detector classifies anomalous. Algorithm 2 trains a per-neighbor radio
//! model on contention-filtered data (rows above the PRB utilization cutoff
//! are excluded, since those anomalies come from load rather than coverage)
//! and prunes anomalous neighbor cells from the handover candidate set.

use std::collections::HashMap;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dataset::{KpiReport, LabeledReport, NEIGHBOR_COUNT};
use crate::error::{Error, Result};
use crate::features::{extract_per_neighbor, extract_serving_plus_neighbors};
use crate::kpi::{prb_utilization, CellId, PrbConfig};
use crate::model::{train_detector, DetectorModel, DetectorSpec};

/// One serving-cell anomaly alert. Emitted only for anomalous reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyAlert {
    pub ue_id: String,
    pub timestamp_ms: i64,
    pub model_kind: String,
    /// Detector anomaly score (higher = more anomalous).
    pub score: f64,
    pub label: u8,
    /// Index of the report within the batch that produced the alert.
    pub report_index: usize,
}

/// Per-report neighbor filtering verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborVerdict {
    pub ue_id: String,
    pub timestamp_ms: i64,
    /// `(cell, anomalous, score)` for each of the five neighbors, in report
    /// order.
    pub neighbors: Vec<(CellId, bool, f64)>,
    /// Non-anomalous neighbor cells, preserving report order.
    pub viable_cells: Vec<CellId>,
}

/// Detect serving-cell anomalies over a batch of reports. Output order
/// follows input order; one alert per anomalous report.
pub fn detect_serving(model: &DetectorModel, reports: &[KpiReport]) -> Result<Vec<AnomalyAlert>> {
    let mut alerts = Vec::new();
    for (i, report) in reports.iter().enumerate() {
        let fv = extract_serving_plus_neighbors(report)?;
        if model.predict(&fv)? {
            alerts.push(AnomalyAlert {
                ue_id: report.ue_id.clone(),
                timestamp_ms: report.timestamp_ms,
                model_kind: model.kind().to_string(),
                score: model.anomaly_score(&fv)?,
                label: 1,
                report_index: i,
            });
        }
    }
    Ok(alerts)
}

/// Outcome of the PRB contention filter.
#[derive(Debug, Clone, Serialize)]
pub struct ContentionFilterSummary {
    pub retained: Vec<LabeledReport>,
    pub removed: usize,
}

/// Retain reports whose PRB utilization stays at or below `cutoff`.
pub fn prb_contention_filter(
    reports: &[LabeledReport],
    cutoff: f64,
    prb: &PrbConfig,
) -> Result<ContentionFilterSummary> {
    if !(cutoff > 0.0 && cutoff <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "contention cutoff must be in (0, 1], got {cutoff}"
        )));
    }
    let mut retained = Vec::with_capacity(reports.len());
    for lr in reports {
        if prb_utilization(lr.report.prb_used_dl, prb)? <= cutoff {
            retained.push(lr.clone());
        }
    }
    let removed = reports.len() - retained.len();
    Ok(ContentionFilterSummary { retained, removed })
}

/// Train the neighbor radio-coverage detector on contention-filtered data.
///
/// One training row per (report, neighbor) pair — the 3-feature radio
/// triplet — so a single model can score any individual neighbor cell. For
/// supervised detectors each neighbor row inherits its report's label (poor
/// coverage co-occurring with degradation).
pub fn train_neighbor_model(
    filtered: &[LabeledReport],
    spec: &DetectorSpec,
) -> Result<DetectorModel> {
    if filtered.is_empty() {
        return Err(Error::InvalidInput(
            "contention filter left no training rows".into(),
        ));
    }
    let mut xs = Vec::with_capacity(filtered.len() * NEIGHBOR_COUNT);
    let mut ys = Vec::with_capacity(filtered.len() * NEIGHBOR_COUNT);
    for lr in filtered {
        for i in 0..NEIGHBOR_COUNT {
            xs.push(extract_per_neighbor(&lr.report, i)?);
            ys.push(lr.label);
        }
    }
    train_detector(spec, &xs, Some(&ys))
}

/// Score each of one report's five neighbors and list the viable cells.
pub fn filter_neighbors(model: &DetectorModel, report: &KpiReport) -> Result<NeighborVerdict> {
    let mut neighbors = Vec::with_capacity(NEIGHBOR_COUNT);
    let mut viable_cells = Vec::new();
    for i in 0..NEIGHBOR_COUNT {
        let fv = extract_per_neighbor(report, i)?;
        let anomalous = model.predict(&fv)?;
        let score = model.anomaly_score(&fv)?;
        let cell = report.neighbors[i].0.clone();
        if !anomalous {
            viable_cells.push(cell.clone());
        }
        neighbors.push((cell, anomalous, score));
    }
    Ok(NeighborVerdict {
        ue_id: report.ue_id.clone(),
        timestamp_ms: report.timestamp_ms,
        neighbors,
        viable_cells,
    })
}

/// Fraction of anomalous (report, neighbor) pairs over a report set.
pub fn neighbor_anomaly_fraction(
    model: &DetectorModel,
    reports: &[KpiReport],
) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("empty report set".into()));
    }
    let mut flagged = 0usize;
    for report in reports {
        for i in 0..NEIGHBOR_COUNT {
            if model.predict(&extract_per_neighbor(report, i)?)? {
                flagged += 1;
            }
        }
    }
    Ok(flagged as f64 / (reports.len() * NEIGHBOR_COUNT) as f64)
}

/// Per-UE mean of the flagged neighbor fraction, for distribution checks.
pub fn neighbor_anomaly_fraction_per_ue(
    model: &DetectorModel,
    reports: &[KpiReport],
) -> Result<Vec<(String, f64)>> {
    let mut per_ue: HashMap<&str, (usize, usize)> = HashMap::new();
    for report in reports {
        let entry = per_ue.entry(report.ue_id.as_str()).or_default();
        for i in 0..NEIGHBOR_COUNT {
            entry.1 += 1;
            if model.predict(&extract_per_neighbor(report, i)?)? {
                entry.0 += 1;
            }
        }
    }
    let mut out: Vec<(String, f64)> = per_ue
        .into_iter()
        .map(|(ue, (f, n))| (ue.to_string(), f as f64 / n as f64))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Time-window alert debouncer: a UE is surfaced only once it has
/// accumulated `threshold` alerts within `window_ms`. The defaults
/// (threshold 1, window 0) pass every alert through.
#[derive(Debug, Clone)]
pub struct AlertDebouncer {
    threshold: usize,
    window_ms: i64,
    history: HashMap<String, VecDeque<i64>>,
}

impl AlertDebouncer {
    pub fn new(threshold: usize, window_ms: i64) -> Self {
        AlertDebouncer {
            threshold: threshold.max(1),
            window_ms: window_ms.max(0),
            history: HashMap::new(),
        }
    }

    pub fn passthrough() -> Self {
        AlertDebouncer::new(1, 0)
    }

    /// Record one alert; returns whether it should surface.
    pub fn admit(&mut self, ue_id: &str, timestamp_ms: i64) -> bool {
        if self.threshold == 1 {
            return true;
        }
        let entry = self.history.entry(ue_id.to_string()).or_default();
        entry.push_back(timestamp_ms);
        while let Some(&front) = entry.front() {
            if timestamp_ms - front > self.window_ms {
                entry.pop_front();
            } else {
                break;
            }
        }
        entry.len() >= self.threshold
    }
}

/// ECDF rows for one KPI across cell groups (serving vs each neighbor
/// position), mirroring a distribution-comparison plot as CSV.
pub fn rssinr_ecdf_csv(reports: &[KpiReport]) -> String {
    let mut out = String::from("group,rssinr,cumulative_fraction\n");
    let mut groups: Vec<(String, Vec<f64>)> = vec![(
        "serving".to_string(),
        reports.iter().map(|r| r.serving_radio.rssinr).collect(),
    )];
    for i in 0..NEIGHBOR_COUNT {
        groups.push((
            format!("neighbor{}", i + 1),
            reports.iter().map(|r| r.neighbors[i].1.rssinr).collect(),
        ));
    }
    for (name, mut values) in groups {
        values.sort_by(|a, b| a.total_cmp(b));
        let n = values.len() as f64;
        for (k, v) in values.iter().enumerate() {
            out.push_str(&format!("{name},{v},{}\n", (k + 1) as f64 / n));
        }
    }
    out
}

/// Serialize alerts as JSON lines (one object per line).
pub fn alerts_to_jsonl(alerts: &[AnomalyAlert]) -> Result<String> {
    let mut out = String::new();
    for a in alerts {
        out.push_str(&serde_json::to_string(a)?);
        out.push('\n');
    }
    Ok(out)
}

/// Serialize verdicts as JSON lines (one object per line).
pub fn verdicts_to_jsonl(verdicts: &[NeighborVerdict]) -> Result<String> {
    let mut out = String::new();
    for v in verdicts {
        out.push_str(&serde_json::to_string(v)?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureVector, SchemaId};
    use crate::forest::RandomForestParams;
    use crate::kpi::RadioTriplet;
    use crate::model::{DetectorInner, ModelKind};

    fn report(i: usize, prb: u32, nb_rssinr: [f64; 5]) -> KpiReport {
        let nb = |n: usize| {
            (
                CellId(format!("cell-{}", n + 2)),
                RadioTriplet {
                    rsrp: -90.0,
                    rssinr: nb_rssinr[n],
                    rsrq: -11.0,
                },
            )
        };
        KpiReport {
            timestamp_ms: 1_000 + i as i64,
            ue_id: format!("ue-{:02}", i % 3 + 1),
            du_id: "du-1".into(),
            serving_cell: CellId("cell-1".into()),
            prb_used_dl: prb,
            serving_radio: RadioTriplet {
                rsrp: -84.0,
                rssinr: 15.0,
                rsrq: -9.0,
            },
            neighbors: [nb(0), nb(1), nb(2), nb(3), nb(4)],
            throughput_dl: 30.0,
            target_throughput: 40.0,
        }
    }

    /// A neighbor detector that flags triplets with rssinr below 0.
    fn threshold_neighbor_model() -> DetectorModel {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..200 {
            let weak = i % 2 == 0;
            let rssinr = if weak { -4.0 - (i % 5) as f64 } else { 8.0 + (i % 7) as f64 };
            xs.push(
                FeatureVector::new(
                    SchemaId::PerNeighbor,
                    vec![-95.0 - (i % 3) as f64, rssinr, -12.0],
                )
                .unwrap(),
            );
            ys.push(weak);
        }
        train_detector(
            &DetectorSpec::RandomForest {
                params: RandomForestParams {
                    n_estimators: 15,
                    ..RandomForestParams::default()
                },
                seed: 3,
            },
            &xs,
            Some(&ys),
        )
        .unwrap()
    }

    #[test]
    fn contention_filter_boundaries() {
        let prb = PrbConfig::default();
        let mk = |p: u32| LabeledReport {
            report: report(0, p, [10.0; 5]),
            label: false,
        };
        // 200/273 = 73.3% exceeds the cutoff, 191/273 = 69.96% does not.
        let rows = vec![mk(200), mk(191), mk(0)];
        let out = prb_contention_filter(&rows, 0.70, &prb).unwrap();
        assert_eq!(out.removed, 1);
        assert_eq!(out.retained.len(), 2);
        assert!(out.retained.iter().all(|lr| lr.report.prb_used_dl != 200));

        // cutoff 1.0 keeps everything.
        let all = prb_contention_filter(&rows, 1.0, &prb).unwrap();
        assert_eq!(all.removed, 0);

        // Idempotence.
        let again = prb_contention_filter(&out.retained, 0.70, &prb).unwrap();
        assert_eq!(again.removed, 0);
        assert_eq!(again.retained, out.retained);

        // Monotone in cutoff: larger cutoff retains a superset.
        let tight = prb_contention_filter(&rows, 0.5, &prb).unwrap();
        for lr in &tight.retained {
            assert!(out.retained.contains(lr));
        }

        assert!(prb_contention_filter(&rows, 0.0, &prb).is_err());
    }

    #[test]
    fn neighbor_verdict_orders_and_partitions() {
        let model = threshold_neighbor_model();
        // Neighbors 1 and 3 weak.
        let r = report(0, 50, [-5.0, 9.0, -6.0, 10.0, 11.0]);
        let verdict = filter_neighbors(&model, &r).unwrap();
        assert_eq!(verdict.neighbors.len(), 5);
        let flagged: Vec<&CellId> = verdict
            .neighbors
            .iter()
            .filter(|(_, a, _)| *a)
            .map(|(c, _, _)| c)
            .collect();
        assert_eq!(flagged.len(), 2);
        assert_eq!(verdict.viable_cells.len(), 3);
        // viable ∪ flagged = all five neighbors, no duplicates, order kept.
        let mut all: Vec<&CellId> = verdict.viable_cells.iter().chain(flagged).collect();
        all.sort_by_key(|c| c.as_str().to_string());
        all.dedup();
        assert_eq!(all.len(), 5);
        let expected_viable: Vec<&str> = vec!["cell-3", "cell-5", "cell-6"];
        let got: Vec<&str> = verdict.viable_cells.iter().map(|c| c.as_str()).collect();
        assert_eq!(got, expected_viable);
    }

    #[test]
    fn all_flagged_yields_empty_viable_list() {
        let model = threshold_neighbor_model();
        let r = report(1, 50, [-3.0, -4.0, -5.0, -6.0, -7.0]);
        let verdict = filter_neighbors(&model, &r).unwrap();
        assert!(verdict.viable_cells.is_empty());
        assert!(verdict.neighbors.iter().all(|(_, a, _)| *a));

        let clean = report(2, 50, [9.0, 9.0, 9.0, 9.0, 9.0]);
        let verdict = filter_neighbors(&model, &clean).unwrap();
        assert_eq!(verdict.viable_cells.len(), 5);
    }

    #[test]
    fn fraction_counts_pairs() {
        let model = threshold_neighbor_model();
        // 4 weak slots across 2 reports -> 4/10.
        let rs = vec![
            report(0, 50, [-5.0, 9.0, -6.0, 10.0, 11.0]),
            report(1, 50, [9.0, -4.0, 9.0, -5.0, 9.0]),
        ];
        let f = neighbor_anomaly_fraction(&model, &rs).unwrap();
        assert!((f - 0.4).abs() < 1e-12);
        assert!(neighbor_anomaly_fraction(&model, &[]).is_err());

        let none = vec![report(2, 50, [9.0; 5])];
        assert_eq!(neighbor_anomaly_fraction(&model, &none).unwrap(), 0.0);
    }

    #[test]
    fn detect_serving_emits_in_input_order() {
        // Model that flags PRB above 200 via the 19-feature schema.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..160 {
            let hot = i % 4 == 0;
            let r = report(i, if hot { 220 + (i % 40) as u32 } else { 40 + (i % 100) as u32 }, [10.0; 5]);
            xs.push(extract_serving_plus_neighbors(&r).unwrap());
            ys.push(hot);
        }
        let model = train_detector(
            &DetectorSpec::RandomForest {
                params: RandomForestParams {
                    n_estimators: 15,
                    ..RandomForestParams::default()
                },
                seed: 5,
            },
            &xs,
            Some(&ys),
        )
        .unwrap();

        let batch = vec![
            report(0, 40, [10.0; 5]),
            report(1, 230, [10.0; 5]),
            report(2, 60, [10.0; 5]),
            report(3, 260, [10.0; 5]),
        ];
        let alerts = detect_serving(&model, &batch).unwrap();
        assert_eq!(alerts.len(), 2);
        assert_eq!(alerts[0].report_index, 1);
        assert_eq!(alerts[1].report_index, 3);
        assert!(alerts.iter().all(|a| a.label == 1));

        // Per-report independence: alert count matches per-report oracle.
        let oracle = batch
            .iter()
            .filter(|r| {
                model
                    .predict(&extract_serving_plus_neighbors(r).unwrap())
                    .unwrap()
            })
            .count();
        assert_eq!(alerts.len(), oracle);

        // All-normal batch gives an empty alert list.
        let calm = vec![report(0, 30, [10.0; 5])];
        assert!(detect_serving(&model, &calm).unwrap().is_empty());
        assert_eq!(model.kind(), ModelKind::RandomForest);
    }

    #[test]
    fn neighbor_training_uses_five_rows_per_report() {
        // 30 reports where weak neighbors co-occur with the label.
        let mut rows = Vec::new();
        for i in 0..30 {
            let bad = i % 3 == 0;
            let rssinr = if bad { [-5.0, -4.0, -6.0, -3.0, -5.0] } else { [9.0, 10.0, 8.0, 11.0, 9.0] };
            rows.push(LabeledReport {
                report: report(i, 50, rssinr),
                label: bad,
            });
        }
        let spec = DetectorSpec::RandomForest {
            params: RandomForestParams {
                n_estimators: 10,
                ..RandomForestParams::default()
            },
            seed: 9,
        };
        let model = train_neighbor_model(&rows, &spec).unwrap();
        assert_eq!(model.schema(), SchemaId::PerNeighbor);
        let DetectorInner::RandomForest(_) = &model.inner else {
            panic!("random forest expected");
        };
        // The learned boundary separates weak from strong triplets.
        let f = neighbor_anomaly_fraction(
            &model,
            &rows.iter().map(|lr| lr.report.clone()).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((f - 10.0 / 30.0).abs() < 0.05, "fraction {f}");

        assert!(train_neighbor_model(&[], &spec).is_err());
    }

    #[test]
    fn debouncer_passthrough_and_windowing() {
        let mut pass = AlertDebouncer::passthrough();
        assert!(pass.admit("ue-01", 0));
        assert!(pass.admit("ue-01", 1));

        let mut windowed = AlertDebouncer::new(3, 1000);
        assert!(!windowed.admit("ue-01", 0));
        assert!(!windowed.admit("ue-01", 400));
        assert!(windowed.admit("ue-01", 800), "third alert within window");
        // Outside the window the count resets.
        assert!(!windowed.admit("ue-02", 0));
        assert!(!windowed.admit("ue-02", 2000));
        assert!(!windowed.admit("ue-02", 4000));
    }

    #[test]
    fn ecdf_csv_is_sorted_and_complete() {
        let rs = vec![
            report(0, 50, [1.0, 2.0, 3.0, 4.0, 5.0]),
            report(1, 60, [5.0, 4.0, 3.0, 2.0, 1.0]),
        ];
        let csv = rssinr_ecdf_csv(&rs);
        let lines: Vec<&str> = csv.lines().collect();
        // Header + 6 groups x 2 rows.
        assert_eq!(lines.len(), 1 + 6 * 2);
        assert!(lines[0].starts_with("group,"));
        assert!(csv.contains("serving,15,0.5"));
        assert!(csv.ends_with("1\n"));
    }

    #[test]
    fn jsonl_streams_one_object_per_line() {
        let alerts = vec![
            AnomalyAlert {
                ue_id: "ue-01".into(),
                timestamp_ms: 5,
                model_kind: "random-forest".into(),
                score: 0.9,
                label: 1,
                report_index: 0,
            },
            AnomalyAlert {
                ue_id: "ue-02".into(),
                timestamp_ms: 6,
                model_kind: "random-forest".into(),
                score: 0.8,
                label: 1,
                report_index: 3,
            },
        ];
        let jsonl = alerts_to_jsonl(&alerts).unwrap();
        assert_eq!(jsonl.lines().count(), 2);
        for line in jsonl.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["label"], 1);
        }
    }
}
