//! Classic libpcap file reading and writing (no pcapng).

use std::io::{self, Read, Write};

use thiserror::Error;

pub const LINKTYPE_IEEE802_11_RADIOTAP: u32 = 127;

const MAGIC_US: u32 = 0xA1B2_C3D4;
const MAGIC_NS: u32 = 0xA1B2_3C4D;

/// Upper bound on a single packet; anything larger is treated as corruption.
const MAX_PACKET_LEN: u32 = 256 * 1024;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("not a classic pcap file (magic {0:#010x})")]
    BadMagic(u32),
    #[error("unsupported link type {0} (expected 127, radiotap)")]
    UnsupportedLinkType(u32),
    #[error("pcap global header truncated")]
    TruncatedHeader,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcapHeader {
    pub big_endian: bool,
    pub nanosecond: bool,
    pub version_major: u16,
    pub version_minor: u16,
    pub snaplen: u32,
    pub linktype: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcapPacket {
    /// Capture timestamp in microseconds since the Unix epoch.
    pub ts_us: u64,
    pub orig_len: u32,
    pub data: Vec<u8>,
}

/// Streaming reader over packets.
pub struct PcapReader<R> {
    inner: R,
    header: PcapHeader,
    /// Set when the file ended inside a packet.
    truncated_tail: bool,
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self, PcapError> {
        let mut g = [0u8; 24];
        if read_exact_or_eof(&mut inner, &mut g)? < 24 {
            return Err(PcapError::TruncatedHeader);
        }
        let le_magic = u32::from_le_bytes(g[0..4].try_into().unwrap());
        let be_magic = u32::from_be_bytes(g[0..4].try_into().unwrap());
        let (big_endian, nanosecond) = match (le_magic, be_magic) {
            (MAGIC_US, _) => (false, false),
            (MAGIC_NS, _) => (false, true),
            (_, MAGIC_US) => (true, false),
            (_, MAGIC_NS) => (true, true),
            _ => return Err(PcapError::BadMagic(le_magic)),
        };
        let u16_at = |o: usize| {
            let b = [g[o], g[o + 1]];
            if big_endian { u16::from_be_bytes(b) } else { u16::from_le_bytes(b) }
        };
        let u32_at = |o: usize| {
            let b = g[o..o + 4].try_into().unwrap();
            if big_endian { u32::from_be_bytes(b) } else { u32::from_le_bytes(b) }
        };
        let header = PcapHeader {
            big_endian,
            nanosecond,
            version_major: u16_at(4),
            version_minor: u16_at(6),
            snaplen: u32_at(16),
            linktype: u32_at(20) & 0x0FFF_FFFF,
        };
        if header.linktype != LINKTYPE_IEEE802_11_RADIOTAP {
            return Err(PcapError::UnsupportedLinkType(header.linktype));
        }
        Ok(PcapReader {
            inner,
            header,
            truncated_tail: false,
        })
    }

    pub fn header(&self) -> &PcapHeader {
        &self.header
    }

    pub fn truncated_tail(&self) -> bool {
        self.truncated_tail
    }

    /// Next packet, or `None` at end of file. A packet cut off by the end
    /// of the file ends iteration and sets [`truncated_tail`](Self::truncated_tail).
    pub fn next_packet(&mut self) -> Result<Option<PcapPacket>, PcapError> {
        if self.truncated_tail {
            return Ok(None);
        }
        let mut h = [0u8; 16];
        let got = read_exact_or_eof(&mut self.inner, &mut h)?;
        if got == 0 {
            return Ok(None);
        }
        if got < 16 {
            self.truncated_tail = true;
            return Ok(None);
        }
        let be = self.header.big_endian;
        let u32_at = |o: usize| {
            let b = h[o..o + 4].try_into().unwrap();
            if be { u32::from_be_bytes(b) } else { u32::from_le_bytes(b) }
        };
        let (sec, frac, incl, orig) = (u32_at(0), u32_at(4), u32_at(8), u32_at(12));
        if incl > MAX_PACKET_LEN {
            self.truncated_tail = true;
            return Ok(None);
        }
        let mut data = vec![0u8; incl as usize];
        if read_exact_or_eof(&mut self.inner, &mut data)? < data.len() {
            self.truncated_tail = true;
            return Ok(None);
        }
        let sub_us = if self.header.nanosecond { frac as u64 / 1000 } else { frac as u64 };
        Ok(Some(PcapPacket {
            ts_us: sec as u64 * 1_000_000 + sub_us,
            orig_len: orig,
            data,
        }))
    }
}

/// Writes little-endian, microsecond-resolution pcap (version 2.4).
pub struct PcapWriter<W: Write> {
    inner: W,
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut inner: W, snaplen: u32) -> io::Result<Self> {
        let mut g = Vec::with_capacity(24);
        g.extend_from_slice(&MAGIC_US.to_le_bytes());
        g.extend_from_slice(&2u16.to_le_bytes());
        g.extend_from_slice(&4u16.to_le_bytes());
        g.extend_from_slice(&0i32.to_le_bytes());
        g.extend_from_slice(&0u32.to_le_bytes());
        g.extend_from_slice(&snaplen.to_le_bytes());
        g.extend_from_slice(&LINKTYPE_IEEE802_11_RADIOTAP.to_le_bytes());
        inner.write_all(&g)?;
        Ok(PcapWriter { inner })
    }

    pub fn write_packet(&mut self, ts_us: u64, data: &[u8]) -> io::Result<()> {
        let sec = u32::try_from(ts_us / 1_000_000).map_err(|_| {
            io::Error::new(io::ErrorKind::InvalidInput, "timestamp beyond 32-bit seconds")
        })?;
        let usec = (ts_us % 1_000_000) as u32;
        let len = data.len() as u32;
        let mut h = [0u8; 16];
        h[0..4].copy_from_slice(&sec.to_le_bytes());
        h[4..8].copy_from_slice(&usec.to_le_bytes());
        h[8..12].copy_from_slice(&len.to_le_bytes());
        h[12..16].copy_from_slice(&len.to_le_bytes());
        self.inner.write_all(&h)?;
        self.inner.write_all(data)
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}
