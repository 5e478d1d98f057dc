//! Shared domain types: access point identities, beacon records, capture
//! sessions, and the 802.11 timing constants that set the theoretical
//! measurement rate for each capture mode.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Microseconds in one 802.11 time unit.
pub const TU_US: u64 = 1024;

/// Standard beacon interval advertised by almost every AP.
pub const DEFAULT_BEACON_INTERVAL_TU: u16 = 100;

/// Interval at which a NIC in normal mode hands one RSS report to the host.
pub const DEFAULT_REPORT_INTERVAL_TU: u32 = 1000;

/// Nominal length of one capture run.
pub const DEFAULT_DURATION_S: f64 = 200.0;

/// Number of repeated runs per test scenario.
pub const DEFAULT_RUNS: u32 = 10;

pub const MIN_RSSI_DBM: i8 = -120;
pub const MAX_RSSI_DBM: i8 = 0;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("interval must be positive")]
    NonPositiveInterval,
    #[error("invalid MAC address {0:?}")]
    BadMac(String),
    #[error("SSID is {0} bytes, limit is 32")]
    SsidTooLong(usize),
    #[error("malformed SSID text {0:?}")]
    BadSsid(String),
    #[error("unknown capture mode {0:?} (expected normal or monitor)")]
    BadMode(String),
}

/// Converts a count of time units to milliseconds.
pub fn tu_to_ms(tu: f64) -> f64 {
    tu * 1.024
}

pub fn tu_to_us(tu: u64) -> u64 {
    tu * TU_US
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptureMode {
    /// Filtered NIC operation, one report per report interval.
    Normal,
    /// Unfiltered operation, every decodable beacon reaches the host.
    Monitor,
}

impl CaptureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CaptureMode::Normal => "normal",
            CaptureMode::Monitor => "monitor",
        }
    }
}

impl fmt::Display for CaptureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaptureMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(CaptureMode::Normal),
            "monitor" => Ok(CaptureMode::Monitor),
            _ => Err(ModelError::BadMode(s.to_string())),
        }
    }
}

/// Upper bound on measurements per second for one AP.
///
/// Monitor mode is limited by the AP's beacon interval, normal mode by the
/// NIC report interval. Full precision; round only for display.
pub fn theoretical_rate(
    mode: CaptureMode,
    beacon_interval_tu: u32,
    report_interval_tu: u32,
) -> Result<f64, ModelError> {
    if beacon_interval_tu == 0 || report_interval_tu == 0 {
        return Err(ModelError::NonPositiveInterval);
    }
    let interval = match mode {
        CaptureMode::Monitor => beacon_interval_tu,
        CaptureMode::Normal => report_interval_tu,
    };
    Ok(1000.0 / tu_to_ms(interval as f64))
}

/// Display form used in reports: two decimals, or three below 1 pkt/s
/// (9.77 and 0.977 for the two default modes).
pub fn display_rate(rate: f64) -> String {
    if rate.abs() < 1.0 {
        format!("{rate:.3}")
    } else {
        format!("{rate:.2}")
    }
}

/// 48-bit IEEE MAC address.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub const BROADCAST: MacAddr = MacAddr([0xff; 6]);

    pub fn to_u64(self) -> u64 {
        self.0.iter().fold(0u64, |acc, b| (acc << 8) | *b as u64)
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

impl fmt::Debug for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for MacAddr {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 6];
        let mut parts = s.trim().split([':', '-']);
        for slot in out.iter_mut() {
            let part = parts.next().ok_or_else(|| ModelError::BadMac(s.to_string()))?;
            if part.len() != 2 {
                return Err(ModelError::BadMac(s.to_string()));
            }
            *slot = u8::from_str_radix(part, 16).map_err(|_| ModelError::BadMac(s.to_string()))?;
        }
        if parts.next().is_some() {
            return Err(ModelError::BadMac(s.to_string()));
        }
        Ok(MacAddr(out))
    }
}

impl Serialize for MacAddr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// SSID element payload, at most 32 bytes, stored inline so records stay `Copy`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ssid {
    len: u8,
    bytes: [u8; 32],
}

impl Ssid {
    pub const MAX_LEN: usize = 32;

    pub const EMPTY: Ssid = Ssid { len: 0, bytes: [0; 32] };

    pub fn new(raw: &[u8]) -> Result<Self, ModelError> {
        if raw.len() > Self::MAX_LEN {
            return Err(ModelError::SsidTooLong(raw.len()));
        }
        let mut bytes = [0u8; 32];
        bytes[..raw.len()].copy_from_slice(raw);
        Ok(Ssid { len: raw.len() as u8, bytes })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.len as usize]
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Text form for CSV and reports. Printable UTF-8 passes through;
    /// anything else becomes `hex:` followed by the raw bytes.
    pub fn to_text(&self) -> String {
        match std::str::from_utf8(self.as_bytes()) {
            Ok(s) if !s.starts_with("hex:") && !s.chars().any(char::is_control) => s.to_string(),
            _ => {
                let mut out = String::from("hex:");
                for b in self.as_bytes() {
                    out.push_str(&format!("{b:02x}"));
                }
                out
            }
        }
    }

    pub fn from_text(s: &str) -> Result<Self, ModelError> {
        if let Some(hex) = s.strip_prefix("hex:") {
            if hex.len() % 2 != 0 || !hex.is_ascii() {
                return Err(ModelError::BadSsid(s.to_string()));
            }
            let raw = (0..hex.len())
                .step_by(2)
                .map(|i| u8::from_str_radix(&hex[i..i + 2], 16))
                .collect::<Result<Vec<u8>, _>>()
                .map_err(|_| ModelError::BadSsid(s.to_string()))?;
            Ssid::new(&raw)
        } else {
            Ssid::new(s.as_bytes())
        }
    }
}

impl Default for Ssid {
    fn default() -> Self {
        Ssid::EMPTY
    }
}

impl fmt::Debug for Ssid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.to_text())
    }
}

impl fmt::Display for Ssid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl Serialize for Ssid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for Ssid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ssid::from_text(&s).map_err(serde::de::Error::custom)
    }
}

/// An AP as seen by the receiver. The BSSID is the key; the SSID is
/// carried for display only.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ApIdentity {
    pub bssid: MacAddr,
    #[serde(default)]
    pub ssid: Ssid,
}

impl ApIdentity {
    pub fn new(bssid: MacAddr, ssid: Ssid) -> Self {
        ApIdentity { bssid, ssid }
    }
}

impl PartialEq for ApIdentity {
    fn eq(&self, other: &Self) -> bool {
        self.bssid == other.bssid
    }
}

impl Eq for ApIdentity {}

impl std::hash::Hash for ApIdentity {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.bssid.hash(state)
    }
}

impl PartialOrd for ApIdentity {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ApIdentity {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bssid.cmp(&other.bssid)
    }
}

/// One decoded beacon measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeaconRecord {
    /// Receiver timestamp, microseconds since session start.
    pub t_us: u64,
    pub rssi_dbm: i8,
    pub ap: ApIdentity,
    pub beacon_interval_tu: u16,
    pub sequence_number: Option<u16>,
    /// DS parameter set channel, when the beacon carried one.
    pub channel: Option<u8>,
}

impl BeaconRecord {
    /// Field-exact comparison, including the SSID that `==` ignores.
    pub fn same_fields(&self, other: &Self) -> bool {
        self == other && self.ap.ssid == other.ap.ssid
    }
}

/// Where a session came from; used for grouping and file naming.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceLabel {
    pub rp: Option<String>,
    pub run: Option<u32>,
    pub path: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMeta {
    /// Packets that were read but did not yield a record.
    pub skipped: u64,
    pub duplicates: u64,
    /// Breakdown of `skipped` by reason.
    pub skip_reasons: std::collections::BTreeMap<String, u64>,
    /// Absolute timestamp (microseconds) corresponding to `t_us == 0`.
    pub origin_us: u64,
    /// Set when the input held no usable beacon at all.
    pub empty_warning: bool,
    pub label: SourceLabel,
}

impl SessionMeta {
    pub fn skip(&mut self, reason: &str) {
        self.skipped += 1;
        *self.skip_reasons.entry(reason.to_string()).or_default() += 1;
    }
}

/// An ordered stream of beacon records from one capture run.
///
/// Records are ordered by `t_us` (ties keep arrival order); per AP the
/// timestamps are strictly increasing, and every `t_us < duration_us`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureSession {
    pub mode: CaptureMode,
    pub duration_us: u64,
    pub records: Vec<BeaconRecord>,
    pub meta: SessionMeta,
}

impl CaptureSession {
    pub fn new(mode: CaptureMode, duration_us: u64) -> Self {
        CaptureSession {
            mode,
            duration_us,
            records: Vec::new(),
            meta: SessionMeta::default(),
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_us as f64 / 1e6
    }

    /// Distinct APs in BSSID order.
    pub fn aps(&self) -> Vec<ApIdentity> {
        let mut seen = std::collections::BTreeMap::new();
        for r in &self.records {
            seen.entry(r.ap.bssid).or_insert(r.ap);
        }
        seen.into_values().collect()
    }

    pub fn times_for(&self, bssid: MacAddr) -> impl Iterator<Item = u64> + '_ {
        self.records
            .iter()
            .filter(move |r| r.ap.bssid == bssid)
            .map(|r| r.t_us)
    }

    /// Advertised interval for an AP: the most common value among its
    /// records, or the 100 TU default when the AP is absent.
    pub fn beacon_interval_for(&self, bssid: MacAddr) -> u16 {
        let mut counts = std::collections::BTreeMap::<u16, usize>::new();
        for r in self.records.iter().filter(|r| r.ap.bssid == bssid) {
            *counts.entry(r.beacon_interval_tu).or_default() += 1;
        }
        counts
            .into_iter()
            .filter(|(tu, _)| *tu > 0)
            .max_by_key(|(tu, n)| (*n, std::cmp::Reverse(*tu)))
            .map(|(tu, _)| tu)
            .unwrap_or(DEFAULT_BEACON_INTERVAL_TU)
    }

    /// Checks the ordering and range invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut last_per_ap = std::collections::HashMap::new();
        let mut prev = 0u64;
        for (i, r) in self.records.iter().enumerate() {
            if r.t_us < prev {
                return Err(format!("record {i} goes back in time"));
            }
            prev = r.t_us;
            if r.t_us >= self.duration_us {
                return Err(format!("record {i} at {} us is past the session end", r.t_us));
            }
            if !(MIN_RSSI_DBM..=MAX_RSSI_DBM).contains(&r.rssi_dbm) {
                return Err(format!("record {i} has rssi {} dBm", r.rssi_dbm));
            }
            if let Some(last) = last_per_ap.insert(r.ap.bssid, r.t_us) {
                if last >= r.t_us {
                    return Err(format!("record {i} repeats a timestamp for {}", r.ap.bssid));
                }
            }
        }
        Ok(())
    }
}

/// Repeated runs of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSet {
    pub label: String,
    pub runs: Vec<CaptureSession>,
}

impl RunSet {
    pub fn mode(&self) -> Option<CaptureMode> {
        self.runs.first().map(|s| s.mode)
    }

    /// All runs share one capture mode. Durations may differ: each run's
    /// rate uses its own length.
    pub fn is_consistent(&self) -> bool {
        match self.runs.first() {
            None => true,
            Some(first) => self.runs.iter().all(|s| s.mode == first.mode),
        }
    }

    pub fn mean_duration_s(&self) -> f64 {
        if self.runs.is_empty() {
            return 0.0;
        }
        self.runs.iter().map(|s| s.duration_s()).sum::<f64>() / self.runs.len() as f64
    }
}
