//! KPI report ingestion, labeling and train/test splitting.
//!
//! The on-disk format is CSV with a header row, UTF-8, comma separated,
//! `.` decimal point. Column headers are resolved through a [`ColumnMapping`]
//! so files from different dataset versions can be ingested without code
//! changes; the default mapping matches the canonical column names this crate
//! itself writes (see [`ColumnMapping::default`]).
//!
//! Rows with missing or non-finite mandatory fields are dropped and counted,
//! never interpolated. A non-numeric token in a numeric column is treated as
//! a malformed file and aborts the load.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kpi::{CellId, RadioTriplet};

/// Number of neighbor cells carried by every KPI report.
pub const NEIGHBOR_COUNT: usize = 5;

/// One timestamped per-UE KPI measurement row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    /// Milliseconds since epoch.
    pub timestamp_ms: i64,
    pub ue_id: String,
    pub du_id: String,
    pub serving_cell: CellId,
    /// PRBs used for downlink on the serving cell.
    pub prb_used_dl: u32,
    pub serving_radio: RadioTriplet,
    /// Exactly five neighbor cells, in reported order.
    pub neighbors: [(CellId, RadioTriplet); NEIGHBOR_COUNT],
    /// Observed DRB UE throughput downlink, Mbps.
    pub throughput_dl: f64,
    /// Target (desired) throughput, Mbps.
    pub target_throughput: f64,
}

impl KpiReport {
    pub fn validate(&self) -> Result<()> {
        if self.ue_id.is_empty() || self.du_id.is_empty() {
            return Err(Error::InvalidInput("empty ue_id or du_id".into()));
        }
        self.serving_radio.validate()?;
        for (_, triplet) in &self.neighbors {
            triplet.validate()?;
        }
        for (name, v) in [
            ("throughput_dl", self.throughput_dl),
            ("target_throughput", self.target_throughput),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A KPI report plus its anomaly label (`true` = anomalous, y = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledReport {
    pub report: KpiReport,
    pub label: bool,
}

/// Column headers for one neighbor slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborColumns {
    pub cell: String,
    pub rsrp: String,
    pub rssinr: String,
    pub rsrq: String,
}

/// Maps logical KPI report fields onto CSV column headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub timestamp: String,
    pub ue_id: String,
    pub du_id: String,
    pub serving_cell: String,
    pub prb_used_dl: String,
    pub serving_rsrp: String,
    pub serving_rssinr: String,
    pub serving_rsrq: String,
    pub neighbors: [NeighborColumns; NEIGHBOR_COUNT],
    pub throughput_dl: String,
    pub target_throughput: String,
    /// When set, `load_labeled` reads labels verbatim from this column
    /// instead of deriving them from throughput.
    pub label: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        let nb = |i: usize| NeighborColumns {
            cell: format!("nb{i}_cell"),
            rsrp: format!("nb{i}_rsrp"),
            rssinr: format!("nb{i}_rssinr"),
            rsrq: format!("nb{i}_rsrq"),
        };
        ColumnMapping {
            timestamp: "timestamp_ms".into(),
            ue_id: "ue_id".into(),
            du_id: "du_id".into(),
            serving_cell: "serving_cell".into(),
            prb_used_dl: "prb_used_dl".into(),
            serving_rsrp: "serving_rsrp".into(),
            serving_rssinr: "serving_rssinr".into(),
            serving_rsrq: "serving_rsrq".into(),
            neighbors: [nb(1), nb(2), nb(3), nb(4), nb(5)],
            throughput_dl: "throughput_dl".into(),
            target_throughput: "target_throughput".into(),
            label: None,
        }
    }
}

impl ColumnMapping {
    /// Every mapped header, in canonical order (label last, if present).
    pub fn headers(&self) -> Vec<&str> {
        let mut h = vec![
            self.timestamp.as_str(),
            self.ue_id.as_str(),
            self.du_id.as_str(),
            self.serving_cell.as_str(),
            self.prb_used_dl.as_str(),
            self.serving_rsrp.as_str(),
            self.serving_rssinr.as_str(),
            self.serving_rsrq.as_str(),
        ];
        for nb in &self.neighbors {
            h.push(nb.cell.as_str());
            h.push(nb.rsrp.as_str());
            h.push(nb.rssinr.as_str());
            h.push(nb.rsrq.as_str());
        }
        h.push(self.throughput_dl.as_str());
        h.push(self.target_throughput.as_str());
        if let Some(l) = &self.label {
            h.push(l.as_str());
        }
        h
    }

    pub fn validate(&self) -> Result<()> {
        let headers = self.headers();
        let mut seen = HashSet::new();
        for h in &headers {
            if h.is_empty() {
                return Err(Error::InvalidConfig("empty column name in mapping".into()));
            }
            if !seen.insert(*h) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate column name in mapping: {h}"
                )));
            }
        }
        Ok(())
    }
}

/// Result of loading a CSV: parsed reports plus drop diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct LoadSummary {
    pub reports: Vec<KpiReport>,
    /// Data rows seen in the file (excluding the header).
    pub rows_read: usize,
    /// Rows rejected for missing/non-finite mandatory fields.
    pub rows_dropped: usize,
    /// Labels read verbatim when the mapping names a label column.
    #[serde(skip)]
    pub labels: Option<Vec<bool>>,
}

struct ColumnIndex {
    timestamp: usize,
    ue_id: usize,
    du_id: usize,
    serving_cell: usize,
    prb_used_dl: usize,
    serving_rsrp: usize,
    serving_rssinr: usize,
    serving_rsrq: usize,
    neighbors: [[usize; 4]; NEIGHBOR_COUNT],
    throughput_dl: usize,
    target_throughput: usize,
    label: Option<usize>,
}

impl ColumnIndex {
    fn resolve(header: &csv::StringRecord, mapping: &ColumnMapping) -> Result<Self> {
        let find = |name: &str| -> Result<usize> {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        // Resolve in canonical column order so the first missing column
        // reported matches the order users see in the file layout.
        let timestamp = find(&mapping.timestamp)?;
        let ue_id = find(&mapping.ue_id)?;
        let du_id = find(&mapping.du_id)?;
        let serving_cell = find(&mapping.serving_cell)?;
        let prb_used_dl = find(&mapping.prb_used_dl)?;
        let serving_rsrp = find(&mapping.serving_rsrp)?;
        let serving_rssinr = find(&mapping.serving_rssinr)?;
        let serving_rsrq = find(&mapping.serving_rsrq)?;
        let mut neighbors = [[0usize; 4]; NEIGHBOR_COUNT];
        for (i, nb) in mapping.neighbors.iter().enumerate() {
            neighbors[i] = [
                find(&nb.cell)?,
                find(&nb.rsrp)?,
                find(&nb.rssinr)?,
                find(&nb.rsrq)?,
            ];
        }
        Ok(ColumnIndex {
            timestamp,
            ue_id,
            du_id,
            serving_cell,
            prb_used_dl,
            serving_rsrp,
            serving_rssinr,
            serving_rsrq,
            neighbors,
            throughput_dl: find(&mapping.throughput_dl)?,
            target_throughput: find(&mapping.target_throughput)?,
            label: mapping.label.as_deref().map(find).transpose()?,
        })
    }
}

enum Cell {
    Missing,
    Num(f64),
}

fn numeric_cell(record: &csv::StringRecord, idx: usize, column: &str, row: usize) -> Result<Cell> {
    let raw = record.get(idx).unwrap_or("").trim();
    if raw.is_empty() {
        return Ok(Cell::Missing);
    }
    let v: f64 = raw.parse().map_err(|_| Error::NonNumeric {
        column: column.to_string(),
        value: raw.to_string(),
        row,
    })?;
    // inf/NaN tokens parse successfully but fail the finiteness invariant;
    // treat them like missing data rather than a malformed file.
    if v.is_finite() {
        Ok(Cell::Num(v))
    } else {
        Ok(Cell::Missing)
    }
}

fn text_cell(record: &csv::StringRecord, idx: usize) -> Option<String> {
    let raw = record.get(idx).unwrap_or("").trim();
    if raw.is_empty() {
        None
    } else {
        Some(raw.to_string())
    }
}

fn parse_row(
    record: &csv::StringRecord,
    idx: &ColumnIndex,
    mapping: &ColumnMapping,
    row: usize,
) -> Result<Option<(KpiReport, Option<bool>)>> {
    macro_rules! num {
        ($field:ident, $col:expr) => {
            match numeric_cell(record, idx.$field, $col, row)? {
                Cell::Num(v) => v,
                Cell::Missing => return Ok(None),
            }
        };
    }

    let timestamp = num!(timestamp, &mapping.timestamp);
    let prb = num!(prb_used_dl, &mapping.prb_used_dl);
    let s_rsrp = num!(serving_rsrp, &mapping.serving_rsrp);
    let s_rssinr = num!(serving_rssinr, &mapping.serving_rssinr);
    let s_rsrq = num!(serving_rsrq, &mapping.serving_rsrq);
    let thp = num!(throughput_dl, &mapping.throughput_dl);
    let target = num!(target_throughput, &mapping.target_throughput);

    let (Some(ue_id), Some(du_id), Some(serving)) = (
        text_cell(record, idx.ue_id),
        text_cell(record, idx.du_id),
        text_cell(record, idx.serving_cell),
    ) else {
        return Ok(None);
    };

    if prb < 0.0 || thp < 0.0 || target < 0.0 {
        return Ok(None);
    }

    let mut neighbors: Vec<(CellId, RadioTriplet)> = Vec::with_capacity(NEIGHBOR_COUNT);
    for (i, cols) in idx.neighbors.iter().enumerate() {
        let Some(cell) = text_cell(record, cols[0]) else {
            return Ok(None);
        };
        let nb = &mapping.neighbors[i];
        let rsrp = match numeric_cell(record, cols[1], &nb.rsrp, row)? {
            Cell::Num(v) => v,
            Cell::Missing => return Ok(None),
        };
        let rssinr = match numeric_cell(record, cols[2], &nb.rssinr, row)? {
            Cell::Num(v) => v,
            Cell::Missing => return Ok(None),
        };
        let rsrq = match numeric_cell(record, cols[3], &nb.rsrq, row)? {
            Cell::Num(v) => v,
            Cell::Missing => return Ok(None),
        };
        neighbors.push((CellId(cell), RadioTriplet { rsrp, rssinr, rsrq }));
    }
    let neighbors: [(CellId, RadioTriplet); NEIGHBOR_COUNT] =
        neighbors.try_into().expect("exactly five neighbors pushed");

    let label = match idx.label {
        None => None,
        Some(li) => match record.get(li).unwrap_or("").trim() {
            "" => return Ok(None),
            "1" | "true" => Some(true),
            "0" | "false" => Some(false),
            other => {
                return Err(Error::NonNumeric {
                    column: mapping.label.clone().unwrap_or_default(),
                    value: other.to_string(),
                    row,
                })
            }
        },
    };

    let report = KpiReport {
        timestamp_ms: timestamp.round() as i64,
        ue_id,
        du_id,
        serving_cell: CellId(serving),
        prb_used_dl: prb.round() as u32,
        serving_radio: RadioTriplet {
            rsrp: s_rsrp,
            rssinr: s_rssinr,
            rsrq: s_rsrq,
        },
        neighbors,
        throughput_dl: thp,
        target_throughput: target,
    };
    Ok(Some((report, label)))
}

/// Load KPI reports from a CSV file, in file order.
pub fn load_dataset(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<LoadSummary> {
    mapping.validate()?;
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let header = reader.headers()?.clone();
    let idx = ColumnIndex::resolve(&header, mapping)?;

    let mut reports = Vec::new();
    let mut labels = mapping.label.as_ref().map(|_| Vec::new());
    let mut rows_read = 0usize;
    let mut rows_dropped = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        rows_read += 1;
        match parse_row(&record, &idx, mapping, i + 2)? {
            Some((report, label)) => {
                reports.push(report);
                if let (Some(ls), Some(l)) = (labels.as_mut(), label) {
                    ls.push(l);
                }
            }
            None => rows_dropped += 1,
        }
    }
    Ok(LoadSummary {
        reports,
        rows_read,
        rows_dropped,
        labels,
    })
}

/// Load a pre-labeled dataset; the mapping must name a label column.
pub fn load_labeled(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Vec<LabeledReport>> {
    if mapping.label.is_none() {
        return Err(Error::InvalidConfig(
            "mapping has no label column; use load_dataset + label_reports".into(),
        ));
    }
    let summary = load_dataset(path, mapping)?;
    let labels = summary.labels.expect("label column requested");
    Ok(summary
        .reports
        .into_iter()
        .zip(labels)
        .map(|(report, label)| LabeledReport { report, label })
        .collect())
}

fn write_report_fields<W: std::io::Write>(
    writer: &mut csv::Writer<W>,
    r: &KpiReport,
    label: Option<bool>,
) -> Result<()> {
    let mut fields: Vec<String> = vec![
        r.timestamp_ms.to_string(),
        r.ue_id.clone(),
        r.du_id.clone(),
        r.serving_cell.0.clone(),
        r.prb_used_dl.to_string(),
        r.serving_radio.rsrp.to_string(),
        r.serving_radio.rssinr.to_string(),
        r.serving_radio.rsrq.to_string(),
    ];
    for (cell, t) in &r.neighbors {
        fields.push(cell.0.clone());
        fields.push(t.rsrp.to_string());
        fields.push(t.rssinr.to_string());
        fields.push(t.rsrq.to_string());
    }
    fields.push(r.throughput_dl.to_string());
    fields.push(r.target_throughput.to_string());
    if let Some(l) = label {
        fields.push(if l { "1".into() } else { "0".into() });
    }
    writer.write_record(&fields)?;
    Ok(())
}

/// Write reports in the canonical column layout (the default mapping).
pub fn save_reports(path: impl AsRef<Path>, reports: &[KpiReport]) -> Result<()> {
    let mapping = ColumnMapping::default();
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(mapping.headers())?;
    for r in reports {
        write_report_fields(&mut writer, r, None)?;
    }
    writer.flush()?;
    Ok(())
}

/// Write labeled reports: canonical columns plus a trailing `label` column.
pub fn save_labeled(path: impl AsRef<Path>, labeled: &[LabeledReport]) -> Result<()> {
    let mapping = ColumnMapping {
        label: Some("label".into()),
        ..ColumnMapping::default()
    };
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(mapping.headers())?;
    for lr in labeled {
        write_report_fields(&mut writer, &lr.report, Some(lr.label))?;
    }
    writer.flush()?;
    Ok(())
}

/// Label reports by the throughput rule: anomalous iff
/// `throughput_dl < ratio * target_throughput` (strict).
pub fn label_reports(reports: &[KpiReport], ratio: f64) -> Result<Vec<LabeledReport>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "label ratio must be in (0, 1], got {ratio}"
        )));
    }
    Ok(reports
        .iter()
        .map(|r| LabeledReport {
            report: r.clone(),
            label: r.throughput_dl < ratio * r.target_throughput,
        })
        .collect())
}

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.30,
            seed: 42,
            stratified: true,
        }
    }
}

/// Partition labeled reports into disjoint train and test sets.
///
/// Membership is decided by a seeded shuffle; original row order is preserved
/// inside each side. With `stratified` set, the split is performed per class
/// so each side's class proportions stay within one report of the global
/// proportions.
pub fn split(labeled: &[LabeledReport], spec: &SplitSpec) -> Result<(Vec<LabeledReport>, Vec<LabeledReport>)> {
    if labeled.is_empty() {
        return Err(Error::InvalidInput("cannot split an empty dataset".into()));
    }
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test_fraction must be in (0, 1), got {}",
            spec.test_fraction
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut test_mask = vec![false; labeled.len()];

    let mark_class = |indices: &mut Vec<usize>, rng: &mut ChaCha8Rng, mask: &mut [bool]| {
        indices.shuffle(rng);
        let n_test = (spec.test_fraction * indices.len() as f64).round() as usize;
        for &i in indices.iter().take(n_test) {
            mask[i] = true;
        }
    };

    if spec.stratified {
        // Fixed class order keeps the split reproducible.
        for class in [false, true] {
            let mut indices: Vec<usize> = labeled
                .iter()
                .enumerate()
                .filter(|(_, lr)| lr.label == class)
                .map(|(i, _)| i)
                .collect();
            if !indices.is_empty() {
                mark_class(&mut indices, &mut rng, &mut test_mask);
            }
        }
    } else {
        let mut indices: Vec<usize> = (0..labeled.len()).collect();
        mark_class(&mut indices, &mut rng, &mut test_mask);
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, lr) in labeled.iter().enumerate() {
        if test_mask[i] {
            test.push(lr.clone());
        } else {
            train.push(lr.clone());
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "degenerate split: {} train / {} test",
            train.len(),
            test.len()
        )));
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_report(i: usize, thp: f64, target: f64) -> KpiReport {
        let nb = |n: usize| {
            (
                CellId(format!("cell-{n}")),
                RadioTriplet {
                    rsrp: -90.0 - n as f64,
                    rssinr: 10.0 + n as f64,
                    rsrq: -11.0,
                },
            )
        };
        KpiReport {
            timestamp_ms: 1_700_000_000_000 + i as i64 * 250,
            ue_id: format!("ue-{:02}", i % 7 + 1),
            du_id: "du-1".into(),
            serving_cell: CellId("cell-1".into()),
            prb_used_dl: 40 + (i % 50) as u32,
            serving_radio: RadioTriplet {
                rsrp: -85.0,
                rssinr: 18.0,
                rsrq: -9.5,
            },
            neighbors: [nb(2), nb(3), nb(4), nb(5), nb(6)],
            throughput_dl: thp,
            target_throughput: target,
        }
    }

    #[test]
    fn labeling_rule_is_strict_inequality() {
        let reports = vec![toy_report(0, 0.0, 10.0), toy_report(1, 10.0, 10.0)];
        let labeled = label_reports(&reports, 1.0).unwrap();
        assert!(labeled[0].label, "zero throughput must be anomalous");
        assert!(!labeled[1].label, "T_obs == ratio * T_target is normal");
        assert!(label_reports(&reports, 0.0).is_err());
        assert!(label_reports(&reports, 1.5).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let reports: Vec<LabeledReport> = (0..10)
            .map(|i| LabeledReport {
                report: toy_report(i, 10.0, 10.0),
                label: false,
            })
            .collect();
        let spec = SplitSpec {
            test_fraction: 0.3,
            seed: 1,
            stratified: false,
        };
        let (train, test) = split(&reports, &spec).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));
        let (train2, test2) = split(&reports, &spec).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        let (train3, _) = split(
            &reports,
            &SplitSpec {
                seed: 2,
                ..spec
            },
        )
        .unwrap();
        assert_ne!(train, train3, "different seed should move rows");
    }

    #[test]
    fn stratified_split_preserves_balance() {
        // 80/20 class balance.
        let mut reports = Vec::new();
        for i in 0..100 {
            reports.push(LabeledReport {
                report: toy_report(i, 10.0, 10.0),
                label: i < 20,
            });
        }
        let (train, test) = split(&reports, &SplitSpec::default()).unwrap();
        let test_pos = test.iter().filter(|lr| lr.label).count();
        let train_pos = train.iter().filter(|lr| lr.label).count();
        assert_eq!(test.len(), 30);
        assert_eq!(test_pos, 6); // round(0.3 * 20)
        assert_eq!(train_pos, 14);
    }

    #[test]
    fn split_rejects_degenerate_inputs() {
        assert!(split(&[], &SplitSpec::default()).is_err());
        let one = vec![LabeledReport {
            report: toy_report(0, 1.0, 1.0),
            label: false,
        }];
        assert!(split(&one, &SplitSpec::default()).is_err());
    }

    #[test]
    fn empty_csv_with_header_loads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        save_reports(&path, &[]).unwrap();
        let summary = load_dataset(&path, &ColumnMapping::default()).unwrap();
        assert!(summary.reports.is_empty());
        assert_eq!(summary.rows_read, 0);
    }

    #[test]
    fn missing_header_column_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        match load_dataset(&path, &ColumnMapping::default()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "timestamp_ms"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_aborts_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("garbled.csv");
        let mut reports = vec![toy_report(0, 12.0, 15.0)];
        save_reports(&path, &reports).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("-85", "oops");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_dataset(&path, &ColumnMapping::default()),
            Err(Error::NonNumeric { .. })
        ));
        // Whereas an empty cell only drops the row.
        reports[0].throughput_dl = 77.25; // unique token in the file
        reports.push(toy_report(1, 9.0, 15.0));
        save_reports(&path, &reports).unwrap();
        let text = std::fs::read_to_string(&path).unwrap().replace("77.25", "");
        std::fs::write(&path, text).unwrap();
        let summary = load_dataset(&path, &ColumnMapping::default()).unwrap();
        assert_eq!(summary.rows_dropped, 1);
        assert_eq!(summary.reports.len(), 1);
    }

    #[test]
    fn labeled_roundtrip_with_label_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labeled.csv");
        let labeled = vec![
            LabeledReport {
                report: toy_report(0, 3.0, 10.0),
                label: true,
            },
            LabeledReport {
                report: toy_report(1, 10.0, 10.0),
                label: false,
            },
        ];
        save_labeled(&path, &labeled).unwrap();
        let mapping = ColumnMapping {
            label: Some("label".into()),
            ..ColumnMapping::default()
        };
        let back = load_labeled(&path, &mapping).unwrap();
        assert_eq!(labeled, back);
    }

    proptest! {
        #[test]
        fn labeling_monotone_in_ratio(
            thp in 0.0..100.0f64,
            target in 0.1..100.0f64,
            r1 in 0.01..1.0f64,
            r2 in 0.01..1.0f64,
        ) {
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let reports = vec![toy_report(0, thp, target)];
            let at_lo = label_reports(&reports, lo).unwrap()[0].label;
            let at_hi = label_reports(&reports, hi).unwrap()[0].label;
            // Raising the ratio never flips anomalous back to normal.
            prop_assert!(!at_lo || at_hi);
        }

        #[test]
        fn save_load_roundtrip_preserves_fields(
            thp in 0.0..200.0f64,
            target in 0.0..200.0f64,
            rsrp in -156.0..-31.0f64,
            rssinr in -30.0..50.0f64,
            rsrq in -43.0..20.0f64,
            prb in 0u32..300,
        ) {
            let mut report = toy_report(3, thp, target);
            report.prb_used_dl = prb;
            report.serving_radio = RadioTriplet { rsrp, rssinr, rsrq };
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.csv");
            save_reports(&path, &[report.clone()]).unwrap();
            let summary = load_dataset(&path, &ColumnMapping::default()).unwrap();
            prop_assert_eq!(&summary.reports[..], &[report][..]);
        }

        #[test]
        fn split_partitions_exactly(n in 2usize..60, seed in 0u64..50, frac in 0.1..0.9f64) {
            let labeled: Vec<LabeledReport> = (0..n)
                .map(|i| LabeledReport {
                    report: toy_report(i, i as f64, 50.0),
                    label: i % 3 == 0,
                })
                .collect();
            let spec = SplitSpec { test_fraction: frac, seed, stratified: true };
            if let Ok((train, test)) = split(&labeled, &spec) {
                prop_assert_eq!(train.len() + test.len(), n);
                // Row identity: every input row lands on exactly one side.
                let mut seen: Vec<&LabeledReport> = train.iter().chain(test.iter()).collect();
                seen.sort_by_key(|lr| lr.report.timestamp_ms);
                let mut orig: Vec<&LabeledReport> = labeled.iter().collect();
                orig.sort_by_key(|lr| lr.report.timestamp_ms);
                prop_assert_eq!(seen, orig);
            }
        }
    }
}
