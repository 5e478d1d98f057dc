//! Capture files to sessions and back: classic pcap (radiotap link type)
//! and a plain CSV fallback.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pcap::{PcapError, PcapReader, PcapWriter};
use super::{channel_to_freq, decode_packet, encode_frame, BeaconFrame, RadiotapInfo};
use crate::model::{
    ApIdentity, BeaconRecord, CaptureMode, CaptureSession, MacAddr, SessionMeta, Ssid,
    DEFAULT_BEACON_INTERVAL_TU, MAX_RSSI_DBM, MIN_RSSI_DBM,
};

pub const CSV_HEADER: &str = "timestamp_us,bssid,ssid,rssi_dbm,channel,beacon_interval_tu";

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("unsupported link type {0} (only 127, radiotap, is read)")]
    UnsupportedLinkType(u32),
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("I/O failure: {0}")]
    IoFailure(#[from] io::Error),
    #[error("CSV input has header {found:?}, expected {CSV_HEADER:?}")]
    BadCsvHeader { found: String },
    #[error("cannot encode record {index}: {reason}")]
    Encode { index: usize, reason: String },
}

impl From<PcapError> for CaptureError {
    fn from(e: PcapError) -> Self {
        match e {
            PcapError::UnsupportedLinkType(l) => CaptureError::UnsupportedLinkType(l),
            PcapError::Io(io) => CaptureError::IoFailure(io),
            other => CaptureError::UnreadableFile {
                path: PathBuf::new(),
                reason: other.to_string(),
            },
        }
    }
}

/// Which clock supplies the record timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverClock {
    /// Per-packet pcap timestamp written by the capture tool (host time).
    #[default]
    CaptureHeader,
    /// Radiotap TSFT, the NIC's own microsecond counter.
    RadiotapTsft,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadOptions {
    pub clock: ReceiverClock,
    pub mode: CaptureMode,
    /// Absolute time of `t_us == 0`. Defaults to the earliest timestamp in
    /// the input (over every packet, beacon or not).
    pub origin_us: Option<u64>,
    /// Session length. Defaults to the span of the input rounded up to a
    /// whole second.
    pub duration_us: Option<u64>,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            clock: ReceiverClock::CaptureHeader,
            mode: CaptureMode::Monitor,
            origin_us: None,
            duration_us: None,
        }
    }
}

impl ReadOptions {
    /// Options that reproduce `session` exactly when reading back a file
    /// written from it.
    pub fn matching(session: &CaptureSession) -> Self {
        ReadOptions {
            clock: ReceiverClock::CaptureHeader,
            mode: session.mode,
            origin_us: Some(session.meta.origin_us),
            duration_us: Some(session.duration_us),
        }
    }
}

/// A decoded record before the session time origin is applied.
struct Pending {
    abs_us: u64,
    record: BeaconRecord,
}

/// Shared tail of the pcap and CSV readers: origin, ordering, dedup, range.
fn assemble(
    mut pending: Vec<Pending>,
    earliest_seen: Option<u64>,
    latest_seen: Option<u64>,
    mut meta: SessionMeta,
    opts: &ReadOptions,
) -> CaptureSession {
    let origin = opts.origin_us.or(earliest_seen).unwrap_or(0);
    let duration_us = opts.duration_us.unwrap_or_else(|| {
        let span = latest_seen.unwrap_or(origin).saturating_sub(origin);
        (span / 1_000_000 + 1) * 1_000_000
    });
    meta.origin_us = origin;

    // Stable: ties keep arrival order.
    pending.sort_by_key(|p| p.abs_us);

    let mut last_t = std::collections::HashMap::<MacAddr, u64>::new();
    let mut records = Vec::with_capacity(pending.len());
    for p in pending {
        if p.abs_us < origin {
            meta.skip("before_origin");
            continue;
        }
        let t = p.abs_us - origin;
        if t >= duration_us {
            meta.skip("after_end");
            continue;
        }
        if last_t.get(&p.record.ap.bssid) == Some(&t) {
            meta.duplicates += 1;
            continue;
        }
        last_t.insert(p.record.ap.bssid, t);
        records.push(BeaconRecord { t_us: t, ..p.record });
    }
    meta.empty_warning = records.is_empty();
    CaptureSession {
        mode: opts.mode,
        duration_us,
        records,
        meta,
    }
}

fn min_max(acc: &mut (Option<u64>, Option<u64>), v: u64) {
    acc.0 = Some(acc.0.map_or(v, |m| m.min(v)));
    acc.1 = Some(acc.1.map_or(v, |m| m.max(v)));
}

/// Reads a classic pcap stream into a session. Undecodable packets are
/// counted in the metadata, never fatal.
pub fn read_capture<R: Read>(reader: R, opts: &ReadOptions) -> Result<CaptureSession, CaptureError> {
    let mut pcap = PcapReader::new(reader)?;
    let mut meta = SessionMeta::default();
    let mut pending = Vec::new();
    let mut span = (None, None);

    while let Some(pkt) = pcap.next_packet()? {
        let decoded = decode_packet(&pkt.data);
        let abs = match (&decoded, opts.clock) {
            (_, ReceiverClock::CaptureHeader) => Some(pkt.ts_us),
            (Ok((radio, _)), ReceiverClock::RadiotapTsft) => radio.tsft_us,
            (Err(_), ReceiverClock::RadiotapTsft) => None,
        };
        if let Some(abs) = abs {
            min_max(&mut span, abs);
        }
        match decoded {
            Err(e) => meta.skip(e.reason()),
            Ok((radio, beacon)) => match abs {
                None => meta.skip("no_tsft"),
                Some(abs_us) => pending.push(Pending {
                    abs_us,
                    record: BeaconRecord {
                        t_us: 0,
                        rssi_dbm: radio.rssi_dbm,
                        ap: ApIdentity::new(beacon.bssid, beacon.ssid),
                        beacon_interval_tu: beacon.beacon_interval_tu,
                        sequence_number: Some(beacon.sequence_number),
                        channel: beacon.ds_channel,
                    },
                }),
            },
        }
    }
    if pcap.truncated_tail() {
        meta.skip("truncated_packet");
    }
    Ok(assemble(pending, span.0, span.1, meta, opts))
}

fn unreadable(path: &Path, e: impl std::fmt::Display) -> CaptureError {
    CaptureError::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub fn read_capture_file(path: &Path, opts: &ReadOptions) -> Result<CaptureSession, CaptureError> {
    let file = File::open(path).map_err(|e| unreadable(path, e))?;
    let mut session = read_capture(BufReader::new(file), opts).map_err(|e| match e {
        CaptureError::UnreadableFile { reason, .. } => unreadable(path, reason),
        CaptureError::IoFailure(io) => unreadable(path, io),
        other => other,
    })?;
    session.meta.label.path = Some(path.display().to_string());
    Ok(session)
}

/// Reads pcap or CSV, chosen by the `.csv` extension.
pub fn read_input_file(path: &Path, opts: &ReadOptions) -> Result<CaptureSession, CaptureError> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let file = File::open(path).map_err(|e| unreadable(path, e))?;
        let mut session = read_csv(BufReader::new(file), opts)?;
        session.meta.label.path = Some(path.display().to_string());
        Ok(session)
    } else {
        read_capture_file(path, opts)
    }
}

fn record_to_packet(session: &CaptureSession, r: &BeaconRecord) -> (BeaconFrame, RadiotapInfo) {
    let abs = session.meta.origin_us + r.t_us;
    let frame = BeaconFrame {
        bssid: r.ap.bssid,
        source_addr: r.ap.bssid,
        ssid: r.ap.ssid,
        beacon_interval_tu: r.beacon_interval_tu,
        tsf_timestamp_us: r.t_us,
        sequence_number: r.sequence_number.unwrap_or(0) & 0x0fff,
        capability: 0x0401,
        ds_channel: r.channel,
    };
    let radio = RadiotapInfo {
        header_len: 0,
        rssi_dbm: r.rssi_dbm,
        tsft_us: Some(abs),
        flags: None,
        channel_freq_mhz: r.channel.map(channel_to_freq),
    };
    (frame, radio)
}

/// Writes every record as a radiotap beacon packet, microsecond pcap.
/// Packet timestamps are `origin_us + t_us`.
pub fn write_capture<W: Write>(session: &CaptureSession, out: W) -> Result<W, CaptureError> {
    let mut w = PcapWriter::new(out, 65535)?;
    for (index, r) in session.records.iter().enumerate() {
        let (frame, radio) = record_to_packet(session, r);
        let bytes = encode_frame(&frame, &radio).map_err(|e| CaptureError::Encode {
            index,
            reason: e.to_string(),
        })?;
        w.write_packet(session.meta.origin_us + r.t_us, &bytes)?;
    }
    Ok(w.into_inner())
}

pub fn write_capture_file(session: &CaptureSession, path: &Path) -> Result<(), CaptureError> {
    let file = File::create(path)?;
    let mut w = write_capture(session, BufWriter::new(file))?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    timestamp_us: u64,
    bssid: String,
    ssid: String,
    rssi_dbm: i32,
    channel: Option<u8>,
    beacon_interval_tu: Option<u16>,
}

pub fn read_csv<R: Read>(reader: R, opts: &ReadOptions) -> Result<CaptureSession, CaptureError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if headers != CSV_HEADER {
        return Err(CaptureError::BadCsvHeader { found: headers });
    }
    let mut meta = SessionMeta::default();
    let mut pending = Vec::new();
    let mut span = (None, None);
    for row in rdr.deserialize::<CsvRow>() {
        let row = match row {
            Ok(row) => row,
            Err(_) => {
                meta.skip("malformed_row");
                continue;
            }
        };
        min_max(&mut span, row.timestamp_us);
        let (Ok(bssid), Ok(ssid)) = (row.bssid.parse::<MacAddr>(), Ssid::from_text(&row.ssid)) else {
            meta.skip("malformed_row");
            continue;
        };
        if !(MIN_RSSI_DBM as i32..=MAX_RSSI_DBM as i32).contains(&row.rssi_dbm) {
            meta.skip("rssi_out_of_range");
            continue;
        }
        let interval = row.beacon_interval_tu.unwrap_or(DEFAULT_BEACON_INTERVAL_TU);
        if interval == 0 {
            meta.skip("malformed_row");
            continue;
        }
        pending.push(Pending {
            abs_us: row.timestamp_us,
            record: BeaconRecord {
                t_us: 0,
                rssi_dbm: row.rssi_dbm as i8,
                ap: ApIdentity::new(bssid, ssid),
                beacon_interval_tu: interval,
                sequence_number: None,
                channel: row.channel,
            },
        });
    }
    Ok(assemble(pending, span.0, span.1, meta, opts))
}

pub fn write_csv<W: Write>(session: &CaptureSession, out: W) -> Result<W, CaptureError> {
    let mut w = csv::Writer::from_writer(out);
    for r in &session.records {
        w.serialize(CsvRow {
            timestamp_us: session.meta.origin_us + r.t_us,
            bssid: r.ap.bssid.to_string(),
            ssid: r.ap.ssid.to_text(),
            rssi_dbm: r.rssi_dbm as i32,
            channel: r.channel,
            beacon_interval_tu: Some(r.beacon_interval_tu),
        })
        .map_err(|e| io::Error::other(e.to_string()))?;
    }
    if session.records.is_empty() {
        w.write_record(CSV_HEADER.split(','))
            .map_err(|e| io::Error::other(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CaptureError::IoFailure(io::Error::other(e.to_string())))
}

pub fn write_csv_file(session: &CaptureSession, path: &Path) -> Result<(), CaptureError> {
    let file = File::create(path)?;
    let mut w = write_csv(session, BufWriter::new(file))?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_codec::pcap::PcapWriter;

    fn rec(t_us: u64, bssid: &str, seq: u16, rssi: i8) -> BeaconRecord {
        BeaconRecord {
            t_us,
            rssi_dbm: rssi,
            ap: ApIdentity::new(bssid.parse().unwrap(), Ssid::new(b"LAB").unwrap()),
            beacon_interval_tu: 100,
            sequence_number: Some(seq),
            channel: Some(6),
        }
    }

    fn session(records: Vec<BeaconRecord>) -> CaptureSession {
        let mut s = CaptureSession::new(CaptureMode::Monitor, 10_000_000);
        s.meta.origin_us = 1_600_000_000_000_000;
        s.records = records;
        s
    }

    fn data_frame() -> Vec<u8> {
        let mut f = vec![0, 0, 9, 0, 0x20, 0, 0, 0, 0xB0];
        f.extend_from_slice(&[0x08, 0x00, 0, 0]);
        f.extend_from_slice(&[0u8; 20]);
        f
    }

    #[test]
    fn beacons_kept_data_frames_counted() {
        let s = session(vec![
            rec(0, "00:00:00:00:00:01", 1, -60),
            rec(100_000, "00:00:00:00:00:01", 2, -61),
            rec(200_000, "00:00:00:00:00:01", 3, -62),
        ]);
        let mut w = PcapWriter::new(Vec::new(), 65535).unwrap();
        for (i, r) in s.records.iter().enumerate() {
            let (f, radio) = record_to_packet(&s, r);
            w.write_packet(s.meta.origin_us + r.t_us, &encode_frame(&f, &radio).unwrap())
                .unwrap();
            if i < 2 {
                w.write_packet(s.meta.origin_us + r.t_us + 5, &data_frame()).unwrap();
            }
        }
        let back = read_capture(&w.into_inner()[..], &ReadOptions::matching(&s)).unwrap();
        assert_eq!(back.records.len(), 3);
        assert_eq!(back.meta.skipped, 2);
        assert_eq!(back.meta.skip_reasons["not_a_beacon"], 2);
    }

    #[test]
    fn identical_beacons_deduplicated() {
        let r = rec(50, "00:00:00:00:00:01", 7, -60);
        let s = session(vec![r, r]);
        let bytes = write_capture(&s, Vec::new()).unwrap();
        let back = read_capture(&bytes[..], &ReadOptions::matching(&s)).unwrap();
        assert_eq!(back.records.len(), 1);
        assert_eq!(back.meta.duplicates, 1);
    }

    #[test]
    fn round_trip_is_record_exact() {
        let s = session(vec![
            rec(10, "00:00:00:00:00:01", 1, -60),
            rec(10, "00:00:00:00:00:02", 1, -70),
            rec(102_410, "00:00:00:00:00:01", 2, -61),
            rec(9_999_999, "00:00:00:00:00:02", 4095, -120),
        ]);
        let bytes = write_capture(&s, Vec::new()).unwrap();
        let back = read_capture(&bytes[..], &ReadOptions::matching(&s)).unwrap();
        assert_eq!(back, s);
        for (a, b) in back.records.iter().zip(&s.records) {
            assert!(a.same_fields(b));
        }
        back.check_invariants().unwrap();
    }

    #[test]
    fn unordered_packets_are_sorted() {
        let s = session(vec![
            rec(300, "00:00:00:00:00:01", 3, -60),
            rec(100, "00:00:00:00:00:01", 1, -60),
            rec(200, "00:00:00:00:00:01", 2, -60),
        ]);
        let bytes = write_capture(&s, Vec::new()).unwrap();
        let back = read_capture(&bytes[..], &ReadOptions::matching(&s)).unwrap();
        let ts: Vec<u64> = back.records.iter().map(|r| r.t_us).collect();
        assert_eq!(ts, vec![100, 200, 300]);
    }

    #[test]
    fn default_origin_and_duration() {
        let s = session(vec![
            rec(2_000_000, "00:00:00:00:00:01", 1, -60),
            rec(3_500_000, "00:00:00:00:00:01", 2, -60),
        ]);
        let bytes = write_capture(&s, Vec::new()).unwrap();
        let back = read_capture(&bytes[..], &ReadOptions::default()).unwrap();
        assert_eq!(back.meta.origin_us, s.meta.origin_us + 2_000_000);
        assert_eq!(back.records[0].t_us, 0);
        assert_eq!(back.records[1].t_us, 1_500_000);
        assert_eq!(back.duration_us, 2_000_000);
    }

    #[test]
    fn tsft_clock() {
        let s = session(vec![rec(5, "00:00:00:00:00:01", 1, -60)]);
        let bytes = write_capture(&s, Vec::new()).unwrap();
        let opts = ReadOptions {
            clock: ReceiverClock::RadiotapTsft,
            ..ReadOptions::matching(&s)
        };
        let back = read_capture(&bytes[..], &opts).unwrap();
        assert_eq!(back.records, s.records);
    }

    #[test]
    fn empty_session_is_valid_pcap() {
        let s = session(vec![]);
        let bytes = write_capture(&s, Vec::new()).unwrap();
        assert_eq!(bytes.len(), 24);
        let back = read_capture(&bytes[..], &ReadOptions::default()).unwrap();
        assert!(back.records.is_empty());
        assert!(back.meta.empty_warning);
    }

    #[test]
    fn csv_round_trip() {
        let mut r2 = rec(1_000, "00:00:00:00:00:02", 0, -80);
        r2.ap.ssid = Ssid::new(&[0xff, 0x00]).unwrap();
        r2.channel = None;
        let mut s = session(vec![rec(0, "00:00:00:00:00:01", 0, -60), r2]);
        for r in &mut s.records {
            r.sequence_number = None;
        }
        let bytes = write_csv(&s, Vec::new()).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        let back = read_csv(&bytes[..], &ReadOptions::matching(&s)).unwrap();
        assert_eq!(back.records.len(), 2);
        for (a, b) in back.records.iter().zip(&s.records) {
            assert!(a.same_fields(b), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn csv_bad_rows_skipped() {
        let text = format!(
            "{CSV_HEADER}\n0,00:00:00:00:00:01,a,-60,,\nx,bad,a,-60,,\n5,00:00:00:00:00:01,a,12,,\n"
        );
        let back = read_csv(text.as_bytes(), &ReadOptions::default()).unwrap();
        assert_eq!(back.records.len(), 1);
        assert_eq!(back.records[0].beacon_interval_tu, 100);
        assert_eq!(back.meta.skipped, 2);
    }

    #[test]
    fn csv_wrong_header_rejected() {
        assert!(matches!(
            read_csv("a,b,c\n".as_bytes(), &ReadOptions::default()),
            Err(CaptureError::BadCsvHeader { .. })
        ));
    }
}
