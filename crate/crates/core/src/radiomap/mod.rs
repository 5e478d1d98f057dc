//! Offline radio maps: per reference point and AP, the rssi mean and
//! spread, the sample count and the share of 1 s windows holding a sample.

mod stats;

pub use stats::RunningStats;

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{window_occupancy, WindowSpec};
use crate::model::{CaptureSession, MacAddr};

pub const DEFAULT_MIN_SAMPLES: u64 = 10;
pub const DEFAULT_SAMPLES_NEEDED: u32 = 100;

pub const CSV_HEADER: [&str; 8] = [
    "rp_id",
    "x",
    "y",
    "bssid",
    "mean_rssi",
    "stddev",
    "count",
    "availability",
];

#[derive(Debug, Error)]
pub enum RadioMapError {
    #[error("rate {0} pkt/s never collects a sample")]
    Unreachable(f64),
    #[error("samples needed must be at least 1")]
    NoSamplesNeeded,
    #[error("radio map i/o failed: {0}")]
    IoFailure(String),
    #[error("radio map row {row}: {reason}")]
    BadRow { row: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub floor: Option<String>,
}

impl ReferencePoint {
    pub fn new(id: impl Into<String>, x: f64, y: f64) -> Self {
        ReferencePoint {
            id: id.into(),
            x,
            y,
            floor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioMapEntry {
    pub mean_rssi: f64,
    pub stddev: f64,
    pub count: u64,
    /// Share of 1 s windows, pooled over the point's sessions, holding at
    /// least one sample of the AP.
    pub availability: f64,
    /// Fewer samples than the map's minimum; kept, not dropped.
    pub low_sample: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RadioMap {
    pub points: BTreeMap<String, ReferencePoint>,
    pub entries: BTreeMap<(String, MacAddr), RadioMapEntry>,
    pub min_samples: u64,
}

impl RadioMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, rp: &str, bssid: MacAddr) -> Option<&RadioMapEntry> {
        self.entries.get(&(rp.to_string(), bssid))
    }
}

#[derive(Debug, Default)]
struct Fold {
    stats: BTreeMap<MacAddr, RunningStats>,
    occupied: BTreeMap<MacAddr, u64>,
    windows: u64,
}

impl Fold {
    fn add(&mut self, session: &CaptureSession) {
        let spec = WindowSpec::seconds(1.0);
        self.windows += spec.count(session.duration_us) as u64;
        for r in &session.records {
            self.stats.entry(r.ap.bssid).or_default().push(r.rssi_dbm as f64);
        }
        for ap in session.aps() {
            let busy = window_occupancy(session, ap.bssid, spec).iter().filter(|&&c| c > 0).count();
            *self.occupied.entry(ap.bssid).or_default() += busy as u64;
        }
    }
}

/// Builds the map. Points with several sessions pool them; each point is
/// folded independently.
pub fn build_radiomap(sessions: &[(ReferencePoint, CaptureSession)], min_samples: u64) -> RadioMap {
    let mut by_rp: BTreeMap<String, (ReferencePoint, Vec<&CaptureSession>)> = BTreeMap::new();
    for (rp, s) in sessions {
        by_rp
            .entry(rp.id.clone())
            .or_insert_with(|| (rp.clone(), Vec::new()))
            .1
            .push(s);
    }
    let folded: Vec<(ReferencePoint, Fold)> = by_rp
        .into_values()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(rp, list)| {
            let mut f = Fold::default();
            for s in list {
                f.add(s);
            }
            (rp, f)
        })
        .collect();

    let mut map = RadioMap {
        min_samples,
        ..Default::default()
    };
    for (rp, f) in folded {
        for (bssid, st) in &f.stats {
            let busy = f.occupied.get(bssid).copied().unwrap_or(0);
            map.entries.insert(
                (rp.id.clone(), *bssid),
                RadioMapEntry {
                    mean_rssi: st.mean(),
                    stddev: st.stddev(),
                    count: st.count(),
                    availability: if f.windows == 0 { 0.0 } else { busy as f64 / f.windows as f64 },
                    low_sample: st.count() < min_samples,
                },
            );
        }
        map.points.insert(rp.id.clone(), rp);
    }
    map
}

/// Seconds of collection needed at one point to gather `samples_needed`
/// measurements of an AP at `rate` pkt/s.
pub fn survey_time_estimate(rate: f64, samples_needed: u32) -> Result<f64, RadioMapError> {
    if samples_needed == 0 {
        return Err(RadioMapError::NoSamplesNeeded);
    }
    if rate.is_nan() || rate <= 0.0 {
        return Err(RadioMapError::Unreachable(rate));
    }
    Ok(samples_needed as f64 / rate)
}

/// Writes `rp_id,x,y,bssid,mean_rssi,stddev,count,availability`, rssi
/// figures to 0.01 dB.
pub fn write_radiomap<W: Write>(map: &RadioMap, out: W) -> Result<W, RadioMapError> {
    let io = |e: csv::Error| RadioMapError::IoFailure(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for ((rp_id, bssid), e) in &map.entries {
        let (x, y) = map.points.get(rp_id).map_or((0.0, 0.0), |p| (p.x, p.y));
        w.write_record([
            rp_id.clone(),
            x.to_string(),
            y.to_string(),
            bssid.to_string(),
            format!("{:.2}", e.mean_rssi),
            format!("{:.2}", e.stddev),
            e.count.to_string(),
            format!("{:.4}", e.availability),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| RadioMapError::IoFailure(e.to_string()))
}

pub fn export_radiomap(map: &RadioMap, path: &Path) -> Result<(), RadioMapError> {
    let f = std::fs::File::create(path).map_err(|e| RadioMapError::IoFailure(format!("{}: {e}", path.display())))?;
    write_radiomap(map, std::io::BufWriter::new(f))?
        .flush()
        .map_err(|e| RadioMapError::IoFailure(e.to_string()))
}

pub fn read_radiomap<R: Read>(input: R, min_samples: u64) -> Result<RadioMap, RadioMapError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| RadioMapError::IoFailure(e.to_string()))?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(RadioMapError::BadRow {
            row: 0,
            reason: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut map = RadioMap {
        min_samples,
        ..Default::default()
    };
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| RadioMapError::BadRow { row, reason: e.to_string() })?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let bad = |what: &str| RadioMapError::BadRow {
            row,
            reason: format!("bad {what}"),
        };
        let num = |k: usize, what: &str| field(k).parse::<f64>().map_err(|_| bad(what));
        let rp_id = field(0).to_string();
        let bssid: MacAddr = field(3).parse().map_err(|_| bad("bssid"))?;
        let count: u64 = field(6).parse().map_err(|_| bad("count"))?;
        map.points
            .entry(rp_id.clone())
            .or_insert_with(|| ReferencePoint::new(rp_id.clone(), 0.0, 0.0));
        let p = map.points.get_mut(&rp_id).expect("just inserted");
        p.x = num(1, "x")?;
        p.y = num(2, "y")?;
        map.entries.insert(
            (rp_id, bssid),
            RadioMapEntry {
                mean_rssi: num(4, "mean_rssi")?,
                stddev: num(5, "stddev")?,
                count,
                availability: num(7, "availability")?,
                low_sample: count < min_samples,
            },
        );
    }
    Ok(map)
}

pub fn import_radiomap(path: &Path, min_samples: u64) -> Result<RadioMap, RadioMapError> {
    let f = std::fs::File::open(path).map_err(|e| RadioMapError::IoFailure(format!("{}: {e}", path.display())))?;
    read_radiomap(std::io::BufReader::new(f), min_samples)
}
