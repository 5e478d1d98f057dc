//! Radiotap + 802.11 beacon codec and capture-file I/O.

mod beacon;
mod capture;
pub mod pcap;
mod radiotap;

pub use beacon::{decode_beacon, BeaconError, BeaconFrame, BEACON_FIXED_LEN};
pub use capture::{
    read_capture, read_capture_file, read_csv, read_input_file, write_capture, write_capture_file,
    write_csv, write_csv_file, CaptureError, ReadOptions, ReceiverClock, CSV_HEADER,
};
pub use radiotap::{decode_radiotap, RadiotapError, RadiotapInfo, FLAG_FCS_AT_END, MIN_HEADER_LEN};

use thiserror::Error;

use crate::model::{MAX_RSSI_DBM, MIN_RSSI_DBM};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("invalid field: {0}")]
    InvalidField(String),
}

/// Why a captured packet did not yield a beacon record.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error(transparent)]
    Radiotap(#[from] RadiotapError),
    #[error(transparent)]
    Beacon(#[from] BeaconError),
}

impl PacketError {
    /// Short stable key used in skip-count breakdowns.
    pub fn reason(&self) -> &'static str {
        match self {
            PacketError::Radiotap(RadiotapError::MissingRssi) => "missing_rssi",
            PacketError::Radiotap(RadiotapError::RssiOutOfRange(_)) => "rssi_out_of_range",
            PacketError::Radiotap(_) => "malformed_radiotap",
            PacketError::Beacon(BeaconError::NotABeacon(..)) => "not_a_beacon",
            PacketError::Beacon(BeaconError::Truncated(_)) => "truncated_frame",
            PacketError::Beacon(BeaconError::MalformedTaggedElement { .. }) => "malformed_tag",
        }
    }
}

/// Decodes a whole radiotap-encapsulated packet. When the radiotap flags
/// announce a trailing FCS, those 4 bytes are dropped before the tagged
/// elements are parsed; the FCS itself is not checked.
pub fn decode_packet(raw: &[u8]) -> Result<(RadiotapInfo, BeaconFrame), PacketError> {
    let radio = decode_radiotap(raw)?;
    let mut frame = &raw[radio.header_len as usize..];
    if radio.fcs_at_end() {
        if frame.len() < 4 {
            return Err(BeaconError::Truncated(frame.len()).into());
        }
        frame = &frame[..frame.len() - 4];
    }
    let beacon = decode_beacon(frame)?;
    Ok((radio, beacon))
}

/// Builds a radiotap header (TSFT, flags, channel, antenna signal as
/// present in `radio`) followed by the beacon. `radio.header_len` is
/// recomputed.
pub fn encode_frame(frame: &BeaconFrame, radio: &RadiotapInfo) -> Result<Vec<u8>, EncodeError> {
    if frame.beacon_interval_tu == 0 {
        return Err(EncodeError::InvalidField("beacon_interval_tu must be > 0".into()));
    }
    if frame.sequence_number >= 4096 {
        return Err(EncodeError::InvalidField(format!(
            "sequence_number {} does not fit 12 bits",
            frame.sequence_number
        )));
    }
    if !(MIN_RSSI_DBM..=MAX_RSSI_DBM).contains(&radio.rssi_dbm) {
        return Err(EncodeError::InvalidField(format!(
            "rssi {} dBm outside [-120, 0]",
            radio.rssi_dbm
        )));
    }
    if radio.fcs_at_end() {
        return Err(EncodeError::InvalidField(
            "flags: FCS-at-end is not produced by the encoder".into(),
        ));
    }
    let mut out = Vec::with_capacity(32 + BEACON_FIXED_LEN + 40);
    radiotap::encode_radiotap(radio, &mut out);
    beacon::encode_beacon(frame, &mut out);
    Ok(out)
}

/// Like [`encode_frame`] but takes the SSID as raw bytes, so the 32-byte
/// limit is checked here rather than at [`Ssid`](crate::model::Ssid)
/// construction.
pub fn encode_frame_with_ssid(
    frame: &BeaconFrame,
    ssid: &[u8],
    radio: &RadiotapInfo,
) -> Result<Vec<u8>, EncodeError> {
    let ssid = crate::model::Ssid::new(ssid).map_err(|e| EncodeError::InvalidField(e.to_string()))?;
    encode_frame(&BeaconFrame { ssid, ..frame.clone() }, radio)
}

/// Center frequency for a channel number, 2.4 or 5 GHz band.
pub fn channel_to_freq(channel: u8) -> u16 {
    match channel {
        14 => 2484,
        1..=13 => 2407 + 5 * channel as u16,
        _ => 5000 + 5 * channel as u16,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Ssid;

    fn sample() -> (BeaconFrame, RadiotapInfo) {
        let frame = BeaconFrame {
            bssid: "aa:bb:cc:dd:ee:01".parse().unwrap(),
            source_addr: "aa:bb:cc:dd:ee:01".parse().unwrap(),
            ssid: Ssid::new(b"LAB1").unwrap(),
            beacon_interval_tu: 100,
            tsf_timestamp_us: 123_456,
            sequence_number: 4095,
            capability: 0x0431,
            ds_channel: Some(11),
        };
        let radio = RadiotapInfo {
            rssi_dbm: -67,
            tsft_us: Some(1_024_000),
            channel_freq_mhz: Some(2462),
            ..Default::default()
        };
        (frame, radio)
    }

    #[test]
    fn packet_round_trip() {
        let (frame, radio) = sample();
        let bytes = encode_frame(&frame, &radio).unwrap();
        let (r, f) = decode_packet(&bytes).unwrap();
        assert_eq!(f, frame);
        assert_eq!(r.rssi_dbm, -67);
        assert_eq!(r.tsft_us, Some(1_024_000));
        assert_eq!(r.channel_freq_mhz, Some(2462));
    }

    #[test]
    fn empty_ssid_round_trips() {
        let (mut frame, radio) = sample();
        frame.ssid = Ssid::EMPTY;
        let bytes = encode_frame(&frame, &radio).unwrap();
        assert_eq!(decode_packet(&bytes).unwrap().1.ssid.as_bytes(), b"");
    }

    #[test]
    fn invalid_fields_rejected() {
        let (frame, radio) = sample();
        assert!(matches!(
            encode_frame_with_ssid(&frame, &[b'a'; 33], &radio),
            Err(EncodeError::InvalidField(_))
        ));
        let bad = BeaconFrame { beacon_interval_tu: 0, ..frame.clone() };
        assert!(encode_frame(&bad, &radio).is_err());
        let bad = BeaconFrame { sequence_number: 4096, ..frame.clone() };
        assert!(encode_frame(&bad, &radio).is_err());
        let bad_radio = RadiotapInfo { rssi_dbm: 3, ..radio };
        assert!(encode_frame(&frame, &bad_radio).is_err());
    }

    #[test]
    fn fcs_is_stripped_before_tags() {
        let (frame, radio) = sample();
        let radio = RadiotapInfo { flags: Some(0), ..radio };
        let mut bytes = encode_frame(&frame, &radio).unwrap();
        // flip the FCS flag in place and append 4 bytes that would break
        // tag parsing if they were read as an element
        let hlen = u16::from_le_bytes([bytes[2], bytes[3]]) as usize;
        let flags_at = 16; // after the 8-byte aligned TSFT
        assert!(hlen > flags_at);
        bytes[flags_at] = FLAG_FCS_AT_END;
        bytes.extend_from_slice(&[0xdd, 0xff, 0x00, 0x01]);
        let (r, f) = decode_packet(&bytes).unwrap();
        assert!(r.fcs_at_end());
        assert_eq!(f, frame);
    }

    #[test]
    fn channel_frequencies() {
        assert_eq!(channel_to_freq(1), 2412);
        assert_eq!(channel_to_freq(6), 2437);
        assert_eq!(channel_to_freq(14), 2484);
        assert_eq!(channel_to_freq(36), 5180);
    }
}
