//! Stochastic model of beacon emission and NIC capture in normal and
//! monitor mode.
//!
//! Each beacon is captured with probability
//! `p_signal(rssi) * (1 - traffic_loss) * p_state`, where `p_state` comes
//! from a two-state Good/Bad chain whose Good-to-Bad probability grows with
//! host CPU load. Normal mode then decimates captures to at most one record
//! per reporting slot.

mod calibrate;
mod config;
mod engine;
pub mod presets;

pub use calibrate::{
    calibrate, calibrate_by_mode, Achieved, CalibrationError, CalibrationOptions, CalibrationResult,
    FreeParam,
};
pub use config::{load_scenario, parse_scenario, scenario_to_toml};
pub use engine::{
    apply_mode_delivery, beacon_schedule, capture_decision, capture_probability, delivered_indices,
    simulate, simulate_ap, simulate_run, ChainState, SlotTiming,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ApIdentity, CaptureMode, MacAddr, Ssid, DEFAULT_BEACON_INTERVAL_TU, DEFAULT_DURATION_S,
    DEFAULT_REPORT_INTERVAL_TU, DEFAULT_RUNS,
};

/// The only generator the simulator knows. Recorded in scenario files so a
/// file always names the algorithm that produced its numbers.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Normal-mode listen window at the start of each reporting slot.
pub const DEFAULT_LISTEN_WINDOW_TU: u32 = 200;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Parse(String),
    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("cannot read scenario {path}: {reason}")]
    Io { path: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidField {
        field: field.into(),
        reason: reason.into(),
    }
}

fn check_prob(field: &str, p: f64) -> Result<(), ScenarioError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a probability in [0, 1], got {p}")))
    }
}

/// Two-state Good/Bad chain for NIC transients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transient {
    pub p_good_to_bad: f64,
    pub p_bad_to_good: f64,
    pub capture_prob_bad: f64,
}

impl Transient {
    pub const OFF: Transient = Transient {
        p_good_to_bad: 0.0,
        p_bad_to_good: 1.0,
        capture_prob_bad: 0.0,
    };
}

impl Default for Transient {
    fn default() -> Self {
        Transient::OFF
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossModel {
    /// Rssi at which half the beacons fail to decode.
    pub rssi_threshold_dbm: f64,
    pub rssi_slope_db: f64,
    #[serde(default)]
    pub traffic_loss_prob: f64,
    /// Gain applied to the CPU load factor when scaling `p_good_to_bad`.
    #[serde(default)]
    pub stress_gain: f64,
    #[serde(default)]
    pub transient: Transient,
}

impl LossModel {
    /// Every beacon above -120 dBm is captured with probability 1 - 1e-9 or
    /// better.
    pub fn lossless() -> Self {
        LossModel {
            rssi_threshold_dbm: -1000.0,
            rssi_slope_db: 1.0,
            traffic_loss_prob: 0.0,
            stress_gain: 0.0,
            transient: Transient::OFF,
        }
    }

    pub fn p_signal(&self, rssi_dbm: f64) -> f64 {
        1.0 / (1.0 + (-(rssi_dbm - self.rssi_threshold_dbm) / self.rssi_slope_db).exp())
    }

    pub fn p_good_to_bad_at(&self, cpu_load_factor: f64) -> f64 {
        (self.transient.p_good_to_bad * (1.0 + cpu_load_factor * self.stress_gain)).min(1.0)
    }

    /// Long-run share of beacons in the Bad state.
    pub fn stationary_bad(&self, cpu_load_factor: f64) -> f64 {
        let gb = self.p_good_to_bad_at(cpu_load_factor);
        let bg = self.transient.p_bad_to_good;
        if gb + bg == 0.0 {
            0.0
        } else {
            gb / (gb + bg)
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.rssi_threshold_dbm.is_finite() {
            return Err(invalid("loss.rssi_threshold_dbm", "must be finite"));
        }
        if !(self.rssi_slope_db > 0.0 && self.rssi_slope_db.is_finite()) {
            return Err(invalid("loss.rssi_slope_db", "must be positive"));
        }
        check_prob("loss.traffic_loss_prob", self.traffic_loss_prob)?;
        check_prob("loss.transient.p_good_to_bad", self.transient.p_good_to_bad)?;
        check_prob("loss.transient.p_bad_to_good", self.transient.p_bad_to_good)?;
        check_prob("loss.transient.capture_prob_bad", self.transient.capture_prob_bad)?;
        if !(self.stress_gain >= 0.0 && self.stress_gain.is_finite()) {
            return Err(invalid("loss.stress_gain", "must be non-negative"));
        }
        Ok(())
    }
}

fn default_interval() -> u16 {
    DEFAULT_BEACON_INTERVAL_TU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApSpec {
    pub bssid: MacAddr,
    #[serde(default)]
    pub ssid: Ssid,
    #[serde(default = "default_interval")]
    pub beacon_interval_tu: u16,
    #[serde(default)]
    pub phase_offset_us: u64,
    pub mean_rssi: f64,
    #[serde(default)]
    pub rssi_jitter_db: f64,
    /// Overrides the loss model's traffic loss for this AP.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic_loss_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<u8>,
}

impl ApSpec {
    pub fn new(bssid: MacAddr, mean_rssi: f64) -> Self {
        ApSpec {
            bssid,
            ssid: Ssid::EMPTY,
            beacon_interval_tu: DEFAULT_BEACON_INTERVAL_TU,
            phase_offset_us: 0,
            mean_rssi,
            rssi_jitter_db: 0.0,
            traffic_loss_prob: None,
            channel: None,
        }
    }

    pub fn identity(&self) -> ApIdentity {
        ApIdentity::new(self.bssid, self.ssid)
    }

    pub fn interval_us(&self) -> u64 {
        self.beacon_interval_tu as u64 * crate::model::TU_US
    }
}

/// A reference point in a scenario, with per-AP rssi offsets (in AP order;
/// missing entries are 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpSpec {
    pub id: String,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rssi_offset_db: Vec<f64>,
}

impl RpSpec {
    pub fn offset_for(&self, ap_index: usize) -> f64 {
        self.rssi_offset_db.get(ap_index).copied().unwrap_or(0.0)
    }
}

/// Calibration target, and after calibration the value the fitted model
/// achieved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTarget {
    /// AP the target applies to; `None` means the mean over all APs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bssid: Option<MacAddr>,
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub miss_rate_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub achieved_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub achieved_miss_rate_pct: Option<f64>,
}

impl RateTarget {
    pub fn new(rate: f64) -> Self {
        RateTarget {
            bssid: None,
            rate,
            miss_rate_pct: None,
            achieved_rate: None,
            achieved_miss_rate_pct: None,
        }
    }
}

fn default_rng() -> String {
    RNG_ALGORITHM.to_string()
}
fn default_duration() -> f64 {
    DEFAULT_DURATION_S
}
fn default_runs() -> u32 {
    DEFAULT_RUNS
}
fn default_report_interval() -> u32 {
    DEFAULT_REPORT_INTERVAL_TU
}
fn default_listen() -> u32 {
    DEFAULT_LISTEN_WINDOW_TU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    #[serde(default)]
    pub label: String,
    pub mode: CaptureMode,
    #[serde(default = "default_rng")]
    pub rng: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default = "default_report_interval")]
    pub report_interval_tu: u32,
    /// Normal mode only listens this long at the start of each slot.
    #[serde(default = "default_listen")]
    pub listen_window_tu: u32,
    /// Host CPU load in [0, 1].
    #[serde(default)]
    pub cpu_load_factor: f64,
    pub loss: LossModel,
    pub aps: Vec<ApSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rps: Vec<RpSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<RateTarget>,
}

impl SimScenario {
    pub fn new(mode: CaptureMode, aps: Vec<ApSpec>, loss: LossModel) -> Self {
        SimScenario {
            label: String::new(),
            mode,
            rng: default_rng(),
            seed: 0,
            duration_s: DEFAULT_DURATION_S,
            runs: DEFAULT_RUNS,
            report_interval_tu: DEFAULT_REPORT_INTERVAL_TU,
            listen_window_tu: DEFAULT_LISTEN_WINDOW_TU,
            cpu_load_factor: 0.0,
            loss,
            aps,
            rps: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn duration_us(&self) -> u64 {
        (self.duration_s * 1e6).round() as u64
    }

    /// Sessions per scenario: `runs` at every reference point, or just
    /// `runs` when no reference points are defined.
    pub fn session_count(&self) -> usize {
        self.runs as usize * self.rps.len().max(1)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.rng != RNG_ALGORITHM {
            return Err(invalid(
                "rng",
                format!("unsupported generator `{}`, expected `{RNG_ALGORITHM}`", self.rng),
            ));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid("duration_s", "must be positive"));
        }
        if self.runs == 0 {
            return Err(invalid("runs", "must be at least 1"));
        }
        if self.report_interval_tu == 0 {
            return Err(invalid("report_interval_tu", "must be positive"));
        }
        if self.listen_window_tu == 0 {
            return Err(invalid("listen_window_tu", "must be positive"));
        }
        check_prob("cpu_load_factor", self.cpu_load_factor)?;
        self.loss.validate()?;
        if self.aps.is_empty() {
            return Err(invalid("aps", "at least one AP is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, ap) in self.aps.iter().enumerate() {
            if !seen.insert(ap.bssid) {
                return Err(invalid(format!("aps[{i}].bssid"), format!("duplicate {}", ap.bssid)));
            }
            if ap.beacon_interval_tu == 0 {
                return Err(invalid(format!("aps[{i}].beacon_interval_tu"), "must be positive"));
            }
            if !ap.mean_rssi.is_finite() {
                return Err(invalid(format!("aps[{i}].mean_rssi"), "must be finite"));
            }
            if !(ap.rssi_jitter_db >= 0.0 && ap.rssi_jitter_db.is_finite()) {
                return Err(invalid(format!("aps[{i}].rssi_jitter_db"), "must be non-negative"));
            }
            if let Some(p) = ap.traffic_loss_prob {
                check_prob(&format!("aps[{i}].traffic_loss_prob"), p)?;
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for (i, rp) in self.rps.iter().enumerate() {
            if !ids.insert(rp.id.as_str()) {
                return Err(invalid(format!("rps[{i}].id"), format!("duplicate `{}`", rp.id)));
            }
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.rate >= 0.0 && t.rate.is_finite()) {
                return Err(invalid(format!("targets[{i}].rate"), "must be non-negative"));
            }
            if let Some(b) = t.bssid {
                if !seen.contains(&b) {
                    return Err(invalid(format!("targets[{i}].bssid"), format!("no AP {b}")));
                }
            }
        }
        Ok(())
    }
}
