//! Deterministic synthetic KPI dataset generator.
//!
//! Produces per-UE KPI time series with the same shape as public O-RAN SC
//! KPI traces: 20 UEs reporting every 250 ms against a six-cell deployment,
//! serving-cell PRB usage and radio triplets, five neighbor triplets,
//! observed and target throughput. Radio values are quantized to whole dB
//! like real measurement reports.
//!
//! Neighbor coverage follows persistent states: each (UE, cell) pair is in
//! a sticky good/poor coverage regime, each UE has a fixed set of cells that
//! degrade whenever its serving cell is congested, and radio-degradation
//! episodes pull most of the neighborhood down for their duration.
//!
//! Three degradation processes drive the anomaly labels:
//!
//! * **contention** — downlink PRB usage saturates well above the 70%
//!   utilization cutoff and throughput collapses;
//! * **radio** — serving coverage degrades (interference knocks down RSSINR
//!   and RSRQ; coverage holes also drag RSRP) and most neighbors weaken;
//! * **dip** — throughput drops without any KPI signature (irreducible
//!   label noise).
//!
//! High-load "busy" ticks sit just above the contention cutoff with normal
//! throughput, so utilization filtering has real work to do. Everything
//! derives from one seed; the same config always yields the same dataset.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{KpiReport, NEIGHBOR_COUNT};
use crate::error::{Error, Result};
use crate::kpi::{CellId, RadioTriplet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub ues: usize,
    pub ticks: usize,
    pub cells: usize,
    pub tick_interval_ms: i64,
    pub start_timestamp_ms: i64,
    pub seed: u64,
    /// Per-tick probability of entering a contention episode.
    pub contention_start_prob: f64,
    /// Per-tick probability of entering a radio-degradation episode.
    pub radio_start_prob: f64,
    /// Per-tick probability of an unexplained throughput dip.
    pub dip_start_prob: f64,
    /// Probability that a normal tick is a high-load ("busy") tick.
    pub busy_prob: f64,
    /// Probability that a UE sits in a poor-coverage spot relative to one
    /// of the non-susceptible cells. Coverage corners are shared across
    /// UEs so the normal manifold stays dense.
    pub base_weak_prob: f64,
    /// Number of cells (deployment-wide) whose coverage degrades whenever
    /// a serving cell is congested.
    pub susceptible_cells: usize,
    /// Per-neighbor weakness probability during radio episodes.
    pub radio_weak_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            ues: 20,
            ticks: 500,
            cells: 6,
            tick_interval_ms: 250,
            start_timestamp_ms: 1_700_000_000_000,
            seed: 7,
            contention_start_prob: 0.0357,
            radio_start_prob: 0.0264,
            dip_start_prob: 0.0030,
            busy_prob: 0.37,
            base_weak_prob: 0.50,
            susceptible_cells: 4,
            radio_weak_prob: 0.65,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.ues == 0 || self.ticks == 0 {
            return Err(Error::InvalidConfig("ues and ticks must be >= 1".into()));
        }
        if self.cells < NEIGHBOR_COUNT + 1 {
            return Err(Error::InvalidConfig(format!(
                "need at least {} cells for a serving cell plus {NEIGHBOR_COUNT} neighbors",
                NEIGHBOR_COUNT + 1
            )));
        }
        if self.tick_interval_ms <= 0 {
            return Err(Error::InvalidConfig("tick_interval_ms must be > 0".into()));
        }
        if self.susceptible_cells > self.cells {
            return Err(Error::InvalidConfig(format!(
                "susceptible_cells {} exceeds cell count {}",
                self.susceptible_cells, self.cells
            )));
        }
        for (name, p) in [
            ("contention_start_prob", self.contention_start_prob),
            ("radio_start_prob", self.radio_start_prob),
            ("dip_start_prob", self.dip_start_prob),
            ("busy_prob", self.busy_prob),
            ("base_weak_prob", self.base_weak_prob),
            ("radio_weak_prob", self.radio_weak_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Normal,
    Contention { left: u32, severity: f64 },
    Radio {
        left: u32,
        severity: f64,
        interference: bool,
    },
    Dip { left: u32 },
}

struct UeState {
    serving: usize,
    quality: f64,
    target_throughput: f64,
    base_load: f64,
    phase: Phase,
    /// Sticky per-cell poor-coverage regime.
    weak_base: Vec<bool>,
    /// Weak set drawn once per radio episode.
    radio_weak: Vec<bool>,
}

struct Sampler {
    rng: ChaCha8Rng,
    unit: Normal<f64>,
}

impl Sampler {
    fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.unit.sample(&mut self.rng)
    }

    /// Quantized draw: whole-dB resolution like real measurement reports.
    fn db(&mut self, mean: f64, std: f64, lo: f64, hi: f64) -> f64 {
        self.normal(mean, std).clamp(lo, hi).round()
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    fn chance(&mut self, p: f64) -> bool {
        p > 0.0 && self.rng.random_range(0.0..1.0) < p
    }
}

fn strong_neighbor(s: &mut Sampler) -> RadioTriplet {
    RadioTriplet {
        rsrp: s.db(-86.0, 1.3, -90.0, -82.0),
        rssinr: s.db(13.0, 1.3, 9.0, 17.0),
        rsrq: s.db(-10.0, 1.0, -13.0, -7.0),
    }
}

/// Expected poor coverage: a cell that is simply far from the UE.
fn weak_neighbor(s: &mut Sampler) -> RadioTriplet {
    RadioTriplet {
        rsrp: s.db(-103.0, 1.6, -109.0, -97.0),
        rssinr: s.db(5.0, 1.5, 0.0, 10.0),
        rsrq: s.db(-14.0, 1.2, -18.0, -11.0),
    }
}

/// Anomalously degraded coverage (congestion interference or an area-wide
/// radio problem), graded by severity. The depth curve is convex so the
/// severe tail stretches out instead of bunching at a ceiling.
fn degraded_neighbor(s: &mut Sampler, severity: f64) -> RadioTriplet {
    let depth = severity.powf(1.5);
    RadioTriplet {
        rsrp: s.db(-116.0 - 24.0 * depth, 2.0, -150.0, -108.0),
        rssinr: s.db(-2.0 - 15.0 * depth, 1.5, -20.0, 2.0),
        rsrq: s.db(-14.0 - 6.0 * depth, 1.5, -24.0, -11.0),
    }
}

fn serving_radio_normal(s: &mut Sampler, quality: f64) -> RadioTriplet {
    RadioTriplet {
        rsrp: s.db(-80.0 - 6.0 * (1.0 - quality), 1.2, -90.0, -76.0),
        rssinr: s.db(10.0 + 10.0 * quality, 1.2, 9.0, 22.0),
        rsrq: s.db(-9.0 - 2.0 * (1.0 - quality), 1.0, -13.0, -7.0),
    }
}

/// Generate the full dataset, one report per (UE, tick), ordered by tick
/// then UE index.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<KpiReport>> {
    cfg.validate()?;
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        unit: Normal::new(0.0, 1.0).expect("unit normal"),
    };

    let cell_ids: Vec<CellId> = (1..=cfg.cells).map(|i| CellId(format!("cell-{i}"))).collect();
    let du_of = |cell: usize| format!("du-{}", cell * 2 / cfg.cells + 1);

    // Deployment-wide set of cells whose coverage collapses under load
    // (shared interference geometry), spread evenly over the cell list.
    let susceptible: Vec<bool> = {
        let mut set = vec![false; cfg.cells];
        for k in 0..cfg.susceptible_cells {
            set[k * cfg.cells / cfg.susceptible_cells.max(1)] = true;
        }
        set
    };

    // Poor-coverage corners come from a two-option shared menu: either no
    // weak cell, or the first cell outside the susceptible set. Normal-state
    // coverage patterns stay few and heavily shared across UEs.
    let weak_candidate = (0..cfg.cells).find(|c| !susceptible[*c]);

    let mut ues: Vec<UeState> = (0..cfg.ues)
        .map(|u| {
            let mut weak_base = vec![false; cfg.cells];
            if let Some(cell) = weak_candidate {
                if s.chance(cfg.base_weak_prob) {
                    weak_base[cell] = true;
                }
            }
            UeState {
                serving: u % cfg.cells,
                quality: s.uniform(0.45, 0.95),
                target_throughput: s.uniform(28.0, 60.0),
                base_load: s.uniform(50.0, 110.0),
                phase: Phase::Normal,
                weak_base,
                radio_weak: vec![false; cfg.cells],
            }
        })
        .collect();

    let mut reports = Vec::with_capacity(cfg.ues * cfg.ticks);
    for tick in 0..cfg.ticks {
        let timestamp = cfg.start_timestamp_ms + tick as i64 * cfg.tick_interval_ms;
        for (u, ue) in ues.iter_mut().enumerate() {
            // Slow mobility: quality random walk plus occasional handover,
            // and rare coverage-regime flips per neighbor cell.
            ue.quality = (ue.quality + s.normal(0.0, 0.02)).clamp(0.45, 1.0);
            if s.chance(0.002) {
                let mut next = s.rng.random_range(0..cfg.cells - 1);
                if next >= ue.serving {
                    next += 1;
                }
                ue.serving = next;
            }
            // Episode transitions happen on entry to the tick.
            if matches!(ue.phase, Phase::Normal) {
                if s.chance(cfg.contention_start_prob) {
                    ue.phase = Phase::Contention {
                        left: s.rng.random_range(2..=5),
                        severity: s.uniform(0.0, 1.0),
                    };
                } else if s.chance(cfg.radio_start_prob) {
                    ue.phase = Phase::Radio {
                        left: s.rng.random_range(2..=5),
                        severity: s.uniform(0.15, 1.0),
                        interference: s.chance(0.3),
                    };
                    for w in ue.radio_weak.iter_mut() {
                        *w = s.chance(cfg.radio_weak_prob);
                    }
                } else if s.chance(cfg.dip_start_prob) {
                    ue.phase = Phase::Dip {
                        left: s.rng.random_range(1..=2),
                    };
                }
            }

            let busy = matches!(ue.phase, Phase::Normal) && s.chance(cfg.busy_prob);
            // Load-coupled interference: a busier scheduler degrades the
            // susceptible cells more, so busy-tick neighbor levels are a
            // function of the PRB value itself.
            let busy_prb = if busy { Some(s.uniform(192.0, 200.0)) } else { None };

            // Serving-cell KPIs and the throughput ratio, per phase.
            let (prb, radio, ratio) = match ue.phase {
                Phase::Normal => {
                    let prb = match busy_prb {
                        Some(p) => p,
                        None => s.normal(ue.base_load, 15.0).clamp(15.0, 175.0),
                    };
                    let ratio = (0.80 + 0.18 * ue.quality + s.normal(0.0, 0.04))
                        .clamp(0.72, 1.20);
                    (prb, serving_radio_normal(&mut s, ue.quality), ratio)
                }
                Phase::Contention { severity, .. } => {
                    let prb = 200.0 + 73.0 * severity;
                    let ratio = (0.62 - 0.45 * severity + s.normal(0.0, 0.03))
                        .clamp(0.05, 0.68);
                    (prb, serving_radio_normal(&mut s, ue.quality), ratio)
                }
                Phase::Radio {
                    severity,
                    interference,
                    ..
                } => {
                    let prb = s.normal(ue.base_load, 15.0).clamp(15.0, 175.0);
                    let base = serving_radio_normal(&mut s, ue.quality);
                    let radio = if interference {
                        // Interference moves all three serving markers in
                        // proportion, so no single feature monopolizes the
                        // class signal.
                        RadioTriplet {
                            rsrp: base.rsrp,
                            rssinr: s.db(8.0 - 24.0 * severity, 1.2, -18.0, 10.0),
                            rsrq: (base.rsrq - (2.0 + 5.0 * severity)).round().max(-24.0),
                        }
                    } else {
                        RadioTriplet {
                            rsrp: s.db(-90.0 - 52.0 * severity, 2.0, -150.0, -84.0),
                            rssinr: s.db(6.0 - 18.0 * severity, 1.2, -15.0, 10.0),
                            rsrq: s.db(-11.5 - 5.0 * severity, 1.2, -21.0, -9.0),
                        }
                    };
                    let ratio = (0.60 - 0.42 * severity + s.normal(0.0, 0.03))
                        .clamp(0.05, 0.68);
                    (prb, radio, ratio)
                }
                Phase::Dip { .. } => {
                    let prb = s.normal(ue.base_load, 15.0).clamp(15.0, 175.0);
                    let ratio = (0.55 + s.normal(0.0, 0.05)).clamp(0.30, 0.68);
                    (prb, serving_radio_normal(&mut s, ue.quality), ratio)
                }
            };

            // Neighbor triplets: the five non-serving cells in index order.
            // Weakness comes from the sticky regime, plus the congestion
            // profile under load, plus the episode set during radio phases.
            // Congestion pulls the UE's profile cells (and its already-weak
            // cells) down to anomalously degraded levels; radio episodes do
            // the same to the episode's weak set, scaled by severity.
            let congestion_severity = match (ue.phase, busy_prb) {
                (Phase::Contention { severity, .. }, _) => Some(0.2 + 0.8 * severity),
                (_, Some(_)) => Some(0.2),
                _ => None,
            };
            let radio_severity = match ue.phase {
                Phase::Radio { severity, .. } => Some(severity),
                _ => None,
            };
            let mut neighbors: Vec<(CellId, RadioTriplet)> = Vec::with_capacity(NEIGHBOR_COUNT);
            for cell in 0..cfg.cells {
                if cell == ue.serving {
                    continue;
                }
                let triplet = if let Some(severity) = radio_severity {
                    if ue.radio_weak[cell] || ue.weak_base[cell] {
                        degraded_neighbor(&mut s, severity)
                    } else {
                        strong_neighbor(&mut s)
                    }
                } else if let Some(severity) = congestion_severity {
                    if susceptible[cell] || ue.weak_base[cell] {
                        degraded_neighbor(&mut s, severity)
                    } else {
                        strong_neighbor(&mut s)
                    }
                } else if ue.weak_base[cell] {
                    weak_neighbor(&mut s)
                } else {
                    strong_neighbor(&mut s)
                };
                neighbors.push((cell_ids[cell].clone(), triplet));
            }

            let throughput = (ratio * ue.target_throughput).max(0.0);
            reports.push(KpiReport {
                timestamp_ms: timestamp,
                ue_id: format!("ue-{:02}", u + 1),
                du_id: du_of(ue.serving),
                serving_cell: cell_ids[ue.serving].clone(),
                prb_used_dl: prb.round() as u32,
                serving_radio: radio,
                neighbors: neighbors.try_into().expect("five neighbors"),
                throughput_dl: throughput,
                target_throughput: ue.target_throughput,
            });

            // Episode countdowns.
            ue.phase = match ue.phase {
                Phase::Normal => Phase::Normal,
                Phase::Contention { left, severity } if left > 1 => Phase::Contention {
                    left: left - 1,
                    severity,
                },
                Phase::Radio {
                    left,
                    severity,
                    interference,
                } if left > 1 => Phase::Radio {
                    left: left - 1,
                    severity,
                    interference,
                },
                Phase::Dip { left } if left > 1 => Phase::Dip { left: left - 1 },
                _ => Phase::Normal,
            };
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::label_reports;
    use crate::kpi::{prb_utilization, PrbConfig};
    use std::collections::HashSet;

    #[test]
    fn default_config_shape_matches_expectations() {
        let reports = generate(&SynthConfig::default()).unwrap();
        assert_eq!(reports.len(), 10_000);
        let ues: HashSet<&str> = reports.iter().map(|r| r.ue_id.as_str()).collect();
        assert_eq!(ues.len(), 20);
        let cells: HashSet<&str> = reports.iter().map(|r| r.serving_cell.as_str()).collect();
        assert_eq!(cells.len(), 6, "every cell should serve someone");
        for r in &reports {
            r.validate().unwrap();
            assert!(!r.neighbors.iter().any(|(c, _)| *c == r.serving_cell));
            // Radio fields are whole-dB quantized.
            assert_eq!(r.serving_radio.rsrp, r.serving_radio.rsrp.round());
            for (_, t) in &r.neighbors {
                assert_eq!(t.rssinr, t.rssinr.round());
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig {
            seed: 8,
            ..cfg
        })
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn anomaly_rate_sits_in_the_designed_band() {
        let reports = generate(&SynthConfig::default()).unwrap();
        let labeled = label_reports(&reports, 0.70).unwrap();
        let rate = labeled.iter().filter(|lr| lr.label).count() as f64 / labeled.len() as f64;
        assert!(
            (0.20..=0.28).contains(&rate),
            "anomaly rate {rate} drifted out of band"
        );
    }

    #[test]
    fn contention_rows_exceed_the_utilization_cutoff() {
        let cfg = PrbConfig::default();
        let reports = generate(&SynthConfig::default()).unwrap();
        let labeled = label_reports(&reports, 0.70).unwrap();
        // High-utilization rows exist on both sides of the label split
        // (busy rows are normal, contention rows are anomalous).
        let mut high_normal = 0usize;
        let mut high_anomalous = 0usize;
        for lr in &labeled {
            let util = prb_utilization(lr.report.prb_used_dl, &cfg).unwrap();
            if util > 0.70 {
                if lr.label {
                    high_anomalous += 1;
                } else {
                    high_normal += 1;
                }
            }
        }
        assert!(high_normal > 500, "busy rows: {high_normal}");
        assert!(high_anomalous > 300, "contention rows: {high_anomalous}");
    }

    #[test]
    fn timestamps_group_into_per_tick_batches() {
        let cfg = SynthConfig {
            ues: 4,
            ticks: 3,
            ..SynthConfig::default()
        };
        let reports = generate(&cfg).unwrap();
        assert_eq!(reports.len(), 12);
        let stamps: Vec<i64> = reports.iter().map(|r| r.timestamp_ms).collect();
        for (i, stamp) in stamps.iter().enumerate() {
            let expected = cfg.start_timestamp_ms + (i / 4) as i64 * cfg.tick_interval_ms;
            assert_eq!(*stamp, expected);
        }
    }

    #[test]
    fn rejects_too_few_cells() {
        let cfg = SynthConfig {
            cells: 5,
            ..SynthConfig::default()
        };
        assert!(generate(&cfg).is_err());
    }
}
