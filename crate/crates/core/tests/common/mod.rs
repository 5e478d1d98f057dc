//! Strategies and builders shared by the integration tests.
#![allow(dead_code)]

use beaconrate::frame_codec::{BeaconFrame, RadiotapInfo};
use beaconrate::model::{ApIdentity, BeaconRecord, CaptureMode, CaptureSession, MacAddr, Ssid};
use proptest::collection::vec;
use proptest::prelude::*;

pub fn mac() -> impl Strategy<Value = MacAddr> {
    any::<[u8; 6]>().prop_map(MacAddr)
}

pub fn ssid() -> impl Strategy<Value = Ssid> {
    vec(any::<u8>(), 0..=32).prop_map(|b| Ssid::new(&b).unwrap())
}

pub fn beacon_frame() -> impl Strategy<Value = BeaconFrame> {
    (
        mac(),
        mac(),
        ssid(),
        1u16..=u16::MAX,
        any::<u64>(),
        0u16..4096,
        any::<u16>(),
        proptest::option::of(any::<u8>()),
    )
        .prop_map(|(bssid, source_addr, ssid, bi, tsf, seq, cap, ch)| BeaconFrame {
            bssid,
            source_addr,
            ssid,
            beacon_interval_tu: bi,
            tsf_timestamp_us: tsf,
            sequence_number: seq,
            capability: cap,
            ds_channel: ch,
        })
}

/// Radiotap headers the encoder accepts: RSSI in range, no FCS flag.
pub fn radiotap_info() -> impl Strategy<Value = RadiotapInfo> {
    (
        -120i8..=0,
        proptest::option::of(any::<u64>()),
        proptest::option::of(any::<u8>().prop_map(|f| f & !0x10)),
        proptest::option::of(any::<u16>()),
    )
        .prop_map(|(rssi, tsft, flags, freq)| RadiotapInfo {
            header_len: 0,
            rssi_dbm: rssi,
            tsft_us: tsft,
            flags,
            channel_freq_mhz: freq,
        })
}

/// A valid single-AP session: strictly increasing times below the
/// duration.
pub fn session_times(max_duration_s: u64) -> impl Strategy<Value = (u64, Vec<u64>)> {
    (1u64..=max_duration_s).prop_flat_map(|d| {
        let dur = d * 1_000_000;
        (Just(dur), proptest::collection::btree_set(0..dur, 0..400))
            .prop_map(|(dur, set)| (dur, set.into_iter().collect()))
    })
}

pub const AP: MacAddr = MacAddr([2, 0, 0, 0, 0, 1]);

pub fn record(t_us: u64, bssid: MacAddr) -> BeaconRecord {
    BeaconRecord {
        t_us,
        rssi_dbm: -60,
        ap: ApIdentity::new(bssid, Ssid::EMPTY),
        beacon_interval_tu: 100,
        sequence_number: None,
        channel: None,
    }
}

pub fn session_from_times(mode: CaptureMode, duration_us: u64, times: &[u64]) -> CaptureSession {
    let mut s = CaptureSession::new(mode, duration_us);
    s.records = times.iter().map(|&t| record(t, AP)).collect();
    s
}

pub mod props;
