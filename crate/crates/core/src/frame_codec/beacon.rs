//! 802.11 beacon frame (management type, beacon subtype) parsing and
//! construction.

use thiserror::Error;

use crate::model::{MacAddr, Ssid};

/// MAC header (24) + timestamp (8) + interval (2) + capability (2).
pub const BEACON_FIXED_LEN: usize = 36;

const FC_BEACON: u8 = 0x80;
const FC_FLAG_RETRY: u8 = 0x08;
const FC_FLAG_ORDER: u8 = 0x80;

const TAG_SSID: u8 = 0;
const TAG_DS_PARAMS: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BeaconError {
    #[error("frame control {0:#04x} {1:#04x} is not a beacon")]
    NotABeacon(u8, u8),
    #[error("frame truncated at {0} bytes")]
    Truncated(usize),
    #[error("tagged element {tag} at offset {offset} is malformed")]
    MalformedTaggedElement { tag: u8, offset: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeaconFrame {
    pub bssid: MacAddr,
    pub source_addr: MacAddr,
    pub ssid: Ssid,
    pub beacon_interval_tu: u16,
    pub tsf_timestamp_us: u64,
    /// 12-bit sequence number from the sequence control field.
    pub sequence_number: u16,
    pub capability: u16,
    pub ds_channel: Option<u8>,
}

impl Default for BeaconFrame {
    fn default() -> Self {
        BeaconFrame {
            bssid: MacAddr::default(),
            source_addr: MacAddr::default(),
            ssid: Ssid::EMPTY,
            beacon_interval_tu: 100,
            tsf_timestamp_us: 0,
            sequence_number: 0,
            capability: 0x0401,
            ds_channel: None,
        }
    }
}

fn mac_at(raw: &[u8], offset: usize) -> MacAddr {
    let mut m = [0u8; 6];
    m.copy_from_slice(&raw[offset..offset + 6]);
    MacAddr(m)
}

/// Parses a beacon starting at the MAC header. Any FCS must already be
/// stripped.
pub fn decode_beacon(raw: &[u8]) -> Result<BeaconFrame, BeaconError> {
    if raw.len() < 2 {
        return Err(BeaconError::Truncated(raw.len()));
    }
    let (fc0, fc1) = (raw[0], raw[1]);
    if fc0 != FC_BEACON || fc1 & !(FC_FLAG_RETRY | FC_FLAG_ORDER) != 0 {
        return Err(BeaconError::NotABeacon(fc0, fc1));
    }
    // +HTC: a 4-byte HT control field follows sequence control.
    let htc = if fc1 & FC_FLAG_ORDER != 0 { 4 } else { 0 };
    let body = 24 + htc;
    if raw.len() < body + 12 {
        return Err(BeaconError::Truncated(raw.len()));
    }
    let source_addr = mac_at(raw, 10);
    let bssid = mac_at(raw, 16);
    let seq_ctl = u16::from_le_bytes([raw[22], raw[23]]);
    let tsf = u64::from_le_bytes(raw[body..body + 8].try_into().unwrap());
    let interval = u16::from_le_bytes([raw[body + 8], raw[body + 9]]);
    let capability = u16::from_le_bytes([raw[body + 10], raw[body + 11]]);

    let mut ssid = None;
    let mut ds_channel = None;
    let mut pos = body + 12;
    while pos < raw.len() {
        if pos + 2 > raw.len() {
            return Err(BeaconError::MalformedTaggedElement { tag: raw[pos], offset: pos });
        }
        let tag = raw[pos];
        let len = raw[pos + 1] as usize;
        let start = pos + 2;
        if start + len > raw.len() {
            return Err(BeaconError::MalformedTaggedElement { tag, offset: pos });
        }
        let value = &raw[start..start + len];
        match tag {
            TAG_SSID if ssid.is_none() => {
                ssid = Some(
                    Ssid::new(value)
                        .map_err(|_| BeaconError::MalformedTaggedElement { tag, offset: pos })?,
                );
            }
            TAG_DS_PARAMS if ds_channel.is_none() => {
                if len != 1 {
                    return Err(BeaconError::MalformedTaggedElement { tag, offset: pos });
                }
                ds_channel = Some(value[0]);
            }
            _ => {}
        }
        pos = start + len;
    }

    Ok(BeaconFrame {
        bssid,
        source_addr,
        ssid: ssid.unwrap_or(Ssid::EMPTY),
        beacon_interval_tu: interval,
        tsf_timestamp_us: tsf,
        sequence_number: seq_ctl >> 4,
        capability,
        ds_channel,
    })
}

pub(crate) fn encode_beacon(frame: &BeaconFrame, out: &mut Vec<u8>) {
    out.extend_from_slice(&[FC_BEACON, 0x00, 0x00, 0x00]);
    out.extend_from_slice(&MacAddr::BROADCAST.0);
    out.extend_from_slice(&frame.source_addr.0);
    out.extend_from_slice(&frame.bssid.0);
    out.extend_from_slice(&(frame.sequence_number << 4).to_le_bytes());
    out.extend_from_slice(&frame.tsf_timestamp_us.to_le_bytes());
    out.extend_from_slice(&frame.beacon_interval_tu.to_le_bytes());
    out.extend_from_slice(&frame.capability.to_le_bytes());
    out.push(TAG_SSID);
    out.push(frame.ssid.as_bytes().len() as u8);
    out.extend_from_slice(frame.ssid.as_bytes());
    if let Some(ch) = frame.ds_channel {
        out.extend_from_slice(&[TAG_DS_PARAMS, 1, ch]);
    }
}
