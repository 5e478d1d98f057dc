//! Beacon-capture analysis and capture-mode simulation for WLAN RSS
//! fingerprint collection.
//!
//! The crate decodes radiotap/802.11 beacon captures into per-AP RSS
//! streams ([`frame_codec`]), measures rate, miss-rate, arrival-delay
//! histograms, empty-window gaps and probability of capture ([`metrics`]),
//! simulates normal- and monitor-mode capture ([`sim`]), and builds
//! radio maps with survey-time estimates ([`radiomap`]).

pub mod frame_codec;
pub mod metrics;
pub mod model;
pub mod radiomap;
pub mod sim;

pub use model::{
    tu_to_ms, theoretical_rate, ApIdentity, BeaconRecord, CaptureMode, CaptureSession, MacAddr,
    RunSet, Ssid,
};
