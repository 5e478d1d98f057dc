//! Radiotap header decoding and encoding.
//!
//! Only the fields needed for RSS association are interpreted (TSFT, flags,
//! channel, dBm antenna signal); every other registered field is skipped
//! using its size and alignment.

use thiserror::Error;

use crate::model::{MAX_RSSI_DBM, MIN_RSSI_DBM};

pub const MIN_HEADER_LEN: usize = 8;

const BIT_TSFT: u32 = 0;
const BIT_FLAGS: u32 = 1;
const BIT_CHANNEL: u32 = 3;
const BIT_ANTENNA_SIGNAL: u32 = 5;
const BIT_RADIOTAP_NS: u32 = 29;
const BIT_VENDOR_NS: u32 = 30;
const BIT_EXT: u32 = 31;

/// Flags field bit marking a trailing 4-byte FCS.
pub const FLAG_FCS_AT_END: u8 = 0x10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RadiotapError {
    #[error("radiotap header truncated: need {needed} bytes, have {available}")]
    TruncatedHeader { needed: usize, available: usize },
    #[error("unsupported radiotap version {0}")]
    UnsupportedVersion(u8),
    #[error("radiotap length {0} is shorter than the fixed header")]
    BadLength(u16),
    #[error("no dBm antenna signal field")]
    MissingRssi,
    #[error("antenna signal {0} dBm is outside [-120, 0]")]
    RssiOutOfRange(i8),
    #[error("radiotap field bit {0} has no known layout")]
    UnknownField(u32),
}

/// Alignment and size of a field in the default radiotap namespace.
fn field_layout(bit: u32) -> Option<(usize, usize)> {
    Some(match bit {
        0 => (8, 8),   // TSFT
        1 => (1, 1),   // flags
        2 => (1, 1),   // rate
        3 => (2, 4),   // channel
        4 => (2, 2),   // FHSS
        5 => (1, 1),   // dBm antenna signal
        6 => (1, 1),   // dBm antenna noise
        7 => (2, 2),   // lock quality
        8 => (2, 2),   // TX attenuation
        9 => (2, 2),   // dB TX attenuation
        10 => (1, 1),  // dBm TX power
        11 => (1, 1),  // antenna
        12 => (1, 1),  // dB antenna signal
        13 => (1, 1),  // dB antenna noise
        14 => (2, 2),  // RX flags
        15 => (2, 2),  // TX flags
        16 => (1, 1),  // RTS retries
        17 => (1, 1),  // data retries
        18 => (4, 8),  // XChannel
        19 => (1, 3),  // MCS
        20 => (4, 8),  // A-MPDU status
        21 => (2, 12), // VHT
        22 => (8, 12), // timestamp
        23 => (2, 12), // HE
        24 => (2, 12), // HE-MU
        25 => (2, 6),  // HE-MU-other-user
        26 => (1, 1),  // zero-length PSDU
        27 => (2, 4),  // L-SIG
        _ => return None,
    })
}

/// Receiver metadata carried in the radiotap header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RadiotapInfo {
    pub header_len: u16,
    pub rssi_dbm: i8,
    pub tsft_us: Option<u64>,
    pub flags: Option<u8>,
    pub channel_freq_mhz: Option<u16>,
}

impl RadiotapInfo {
    pub fn fcs_at_end(&self) -> bool {
        self.flags.is_some_and(|f| f & FLAG_FCS_AT_END != 0)
    }
}

fn align_up(offset: usize, align: usize) -> usize {
    (offset + align - 1) & !(align - 1)
}

fn truncated(needed: usize, available: usize) -> RadiotapError {
    RadiotapError::TruncatedHeader { needed, available }
}

/// Parses the radiotap header at the start of `raw`.
pub fn decode_radiotap(raw: &[u8]) -> Result<RadiotapInfo, RadiotapError> {
    if raw.len() < MIN_HEADER_LEN {
        return Err(truncated(MIN_HEADER_LEN, raw.len()));
    }
    if raw[0] != 0 {
        return Err(RadiotapError::UnsupportedVersion(raw[0]));
    }
    let header_len = u16::from_le_bytes([raw[2], raw[3]]);
    let hlen = header_len as usize;
    if hlen < MIN_HEADER_LEN {
        return Err(RadiotapError::BadLength(header_len));
    }
    if raw.len() < hlen {
        return Err(truncated(hlen, raw.len()));
    }
    let hdr = &raw[..hlen];

    // Collect all present words first; data starts after the last one.
    let mut words = Vec::new();
    let mut pos = 4;
    loop {
        if pos + 4 > hlen {
            return Err(truncated(pos + 4, hlen));
        }
        let w = u32::from_le_bytes([hdr[pos], hdr[pos + 1], hdr[pos + 2], hdr[pos + 3]]);
        words.push(w);
        pos += 4;
        if w & (1 << BIT_EXT) == 0 {
            break;
        }
    }

    let mut info = RadiotapInfo {
        header_len,
        ..Default::default()
    };
    let mut rssi = None;
    let mut cursor = pos;
    // Namespace state: `in_vendor` words are skipped wholesale after the
    // vendor namespace header has been consumed.
    let mut in_vendor = false;
    let mut ns_word_index = 0usize;
    let mut radiotap_ns_seen = 0usize;

    for &w in &words {
        if !in_vendor {
            for bit in 0..29u32 {
                if w & (1 << bit) == 0 {
                    continue;
                }
                let field = ns_word_index as u32 * 32 + bit;
                let (align, size) = field_layout(field).ok_or(RadiotapError::UnknownField(field))?;
                cursor = align_up(cursor, align);
                if cursor + size > hlen {
                    return Err(truncated(cursor + size, hlen));
                }
                let data = &hdr[cursor..cursor + size];
                // Later radiotap namespaces repeat per-antenna fields; the
                // first namespace carries the combined values.
                if radiotap_ns_seen == 0 {
                    match field {
                        BIT_TSFT => {
                            info.tsft_us = Some(u64::from_le_bytes(data.try_into().unwrap()))
                        }
                        BIT_FLAGS => info.flags = Some(data[0]),
                        BIT_CHANNEL => {
                            info.channel_freq_mhz = Some(u16::from_le_bytes([data[0], data[1]]))
                        }
                        BIT_ANTENNA_SIGNAL => rssi = Some(data[0] as i8),
                        _ => {}
                    }
                } else if field == BIT_ANTENNA_SIGNAL && rssi.is_none() {
                    rssi = Some(data[0] as i8);
                }
                cursor += size;
            }
        }

        if w & (1 << BIT_EXT) == 0 {
            break;
        }
        if w & (1 << BIT_VENDOR_NS) != 0 {
            // Vendor namespace header: OUI[3], sub-namespace, skip length.
            cursor = align_up(cursor, 2);
            if cursor + 6 > hlen {
                return Err(truncated(cursor + 6, hlen));
            }
            let skip = u16::from_le_bytes([hdr[cursor + 4], hdr[cursor + 5]]) as usize;
            cursor += 6 + skip;
            if cursor > hlen {
                return Err(truncated(cursor, hlen));
            }
            in_vendor = true;
            ns_word_index = 0;
        } else if w & (1 << BIT_RADIOTAP_NS) != 0 {
            in_vendor = false;
            ns_word_index = 0;
            radiotap_ns_seen += 1;
        } else if !in_vendor {
            ns_word_index += 1;
        }
    }

    let rssi = rssi.ok_or(RadiotapError::MissingRssi)?;
    if !(MIN_RSSI_DBM..=MAX_RSSI_DBM).contains(&rssi) {
        return Err(RadiotapError::RssiOutOfRange(rssi));
    }
    info.rssi_dbm = rssi;
    Ok(info)
}

/// Channel flags written alongside the frequency.
fn channel_flags(freq_mhz: u16) -> u16 {
    if freq_mhz >= 4900 {
        0x0140 // 5 GHz, OFDM
    } else {
        0x00a0 // 2 GHz, CCK
    }
}

/// Appends a radiotap header for `info` to `out`. `header_len` in `info` is
/// ignored; the written length is returned.
pub(crate) fn encode_radiotap(info: &RadiotapInfo, out: &mut Vec<u8>) -> u16 {
    let start = out.len();
    let mut present = 1u32 << BIT_ANTENNA_SIGNAL;
    if info.tsft_us.is_some() {
        present |= 1 << BIT_TSFT;
    }
    if info.flags.is_some() {
        present |= 1 << BIT_FLAGS;
    }
    if info.channel_freq_mhz.is_some() {
        present |= 1 << BIT_CHANNEL;
    }
    out.extend_from_slice(&[0, 0, 0, 0]);
    out.extend_from_slice(&present.to_le_bytes());

    let pad_to = |out: &mut Vec<u8>, align: usize| {
        while !(out.len() - start).is_multiple_of(align) {
            out.push(0);
        }
    };
    if let Some(tsft) = info.tsft_us {
        pad_to(out, 8);
        out.extend_from_slice(&tsft.to_le_bytes());
    }
    if let Some(flags) = info.flags {
        out.push(flags);
    }
    if let Some(freq) = info.channel_freq_mhz {
        pad_to(out, 2);
        out.extend_from_slice(&freq.to_le_bytes());
        out.extend_from_slice(&channel_flags(freq).to_le_bytes());
    }
    out.push(info.rssi_dbm as u8);

    let len = (out.len() - start) as u16;
    out[start + 2..start + 4].copy_from_slice(&len.to_le_bytes());
    len
}
