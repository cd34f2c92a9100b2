//! KPI domain vocabulary and the definitional radio formulas shared by the
//! rest of the crate.
//!
//! RSRP, RSSINR and RSRQ arrive precomputed in KPI report datasets; the
//! operations here exist for validation and for documenting the quantities,
//! not for recomputing dataset columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque cell identifier. Equality is exact string match.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId(pub String);

impl CellId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidInput("cell id must be non-empty".into()));
        }
        Ok(CellId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for CellId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Radio coverage measurement for one cell as seen by one UE.
///
/// `rsrp` is in dBm (typically -156..-31), `rssinr` and `rsrq` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioTriplet {
    pub rsrp: f64,
    pub rssinr: f64,
    pub rsrq: f64,
}

impl RadioTriplet {
    pub fn new(rsrp: f64, rssinr: f64, rsrq: f64) -> Result<Self> {
        let t = RadioTriplet { rsrp, rssinr, rsrq };
        t.validate()?;
        Ok(t)
    }

    /// All three fields must be finite once validated.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rsrp", self.rsrp),
            ("rssinr", self.rssinr),
            ("rsrq", self.rsrq),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "radio triplet field {name} is not finite: {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Physical resource block configuration of the deployment.
///
/// `deployed_prb_max` is the PRB count actually available in the deployment
/// (273 for a 100 MHz / 30 kHz NR carrier once guard bands are accounted
/// for). The raw bandwidth formula yields a slightly larger number; both are
/// exposed and downstream utilization math always uses `deployed_prb_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrbConfig {
    /// Total carrier bandwidth in Hz.
    pub total_bandwidth_hz: f64,
    /// Subcarrier spacing in Hz.
    pub subcarrier_spacing_hz: f64,
    /// Subcarriers per PRB (12 in NR).
    pub subcarriers_per_prb: u32,
    /// PRBs actually deployed; the normalization constant for utilization.
    pub deployed_prb_max: u32,
}

impl Default for PrbConfig {
    fn default() -> Self {
        // 100 MHz carrier, 30 kHz SCS, 12 subcarriers per PRB, 273 usable PRBs.
        PrbConfig {
            total_bandwidth_hz: 100_000_000.0,
            subcarrier_spacing_hz: 30_000.0,
            subcarriers_per_prb: 12,
            deployed_prb_max: 273,
        }
    }
}

impl PrbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_bandwidth_hz.is_finite() && self.total_bandwidth_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "total_bandwidth_hz must be positive, got {}",
                self.total_bandwidth_hz
            )));
        }
        if !(self.subcarrier_spacing_hz.is_finite() && self.subcarrier_spacing_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "subcarrier_spacing_hz must be positive, got {}",
                self.subcarrier_spacing_hz
            )));
        }
        if self.subcarriers_per_prb == 0 {
            return Err(Error::InvalidConfig(
                "subcarriers_per_prb must be positive".into(),
            ));
        }
        if self.deployed_prb_max == 0 {
            return Err(Error::InvalidConfig(
                "deployed_prb_max must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Raw PRB capacity of the carrier:
/// `floor(total_bandwidth / (subcarrier_spacing * subcarriers_per_prb))`.
///
/// This is the bandwidth formula value, not necessarily the deployed maximum
/// (guard bands reduce the usable count; use `PrbConfig::deployed_prb_max`
/// for utilization).
pub fn prb_capacity(cfg: &PrbConfig) -> Result<u32> {
    cfg.validate()?;
    let prb_bw = cfg.subcarrier_spacing_hz * f64::from(cfg.subcarriers_per_prb);
    Ok((cfg.total_bandwidth_hz / prb_bw).floor() as u32)
}

/// Downlink PRB utilization: `prb_used / deployed_prb_max`.
///
/// Values above 1.0 are possible if a report claims more PRBs than deployed;
/// callers treat that as extreme contention rather than an error.
pub fn prb_utilization(prb_used: u32, cfg: &PrbConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(f64::from(prb_used) / f64::from(cfg.deployed_prb_max))
}

/// RSRQ in the linear domain: `n_rb * rsrp / rssi`.
///
/// All quantities are linear powers; converting to/from dB is the caller's
/// concern.
pub fn rsrq_linear(n_rb: u32, rsrp_linear: f64, rssi_linear: f64) -> Result<f64> {
    if n_rb == 0 {
        return Err(Error::InvalidInput("n_rb must be >= 1".into()));
    }
    if !(rssi_linear.is_finite() && rssi_linear > 0.0) {
        return Err(Error::InvalidInput(format!(
            "rssi_linear must be positive, got {rssi_linear}"
        )));
    }
    Ok(f64::from(n_rb) * rsrp_linear / rssi_linear)
}
