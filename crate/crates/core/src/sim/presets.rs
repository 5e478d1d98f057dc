//! Scenario presets shipped with the crate, one per capture test, mode and
//! (for the CPU-load tests) NIC vendor. Each file carries its calibration
//! targets together with the values the fitted model achieved.

use thiserror::Error;

use super::{parse_scenario, SimScenario};
use crate::model::CaptureMode;

pub struct Preset {
    pub family: &'static str,
    pub vendor: Option<&'static str>,
    pub mode: CaptureMode,
    pub text: &'static str,
}

impl Preset {
    pub fn name(&self) -> String {
        match self.vendor {
            Some(v) => format!("{}-{}-{}", self.family, v, self.mode),
            None => format!("{}-{}", self.family, self.mode),
        }
    }

    pub fn scenario(&self) -> SimScenario {
        parse_scenario(self.text).expect("shipped preset parses")
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        family: "zero-loss",
        vendor: None,
        mode: CaptureMode::Normal,
        text: include_str!("../../presets/zero-loss-normal.toml"),
    },
    Preset {
        family: "zero-loss",
        vendor: None,
        mode: CaptureMode::Monitor,
        text: include_str!("../../presets/zero-loss-monitor.toml"),
    },
    Preset {
        family: "distance-strong",
        vendor: None,
        mode: CaptureMode::Normal,
        text: include_str!("../../presets/distance-strong-normal.toml"),
    },
    Preset {
        family: "distance-strong",
        vendor: None,
        mode: CaptureMode::Monitor,
        text: include_str!("../../presets/distance-strong-monitor.toml"),
    },
    Preset {
        family: "distance-weak",
        vendor: None,
        mode: CaptureMode::Normal,
        text: include_str!("../../presets/distance-weak-normal.toml"),
    },
    Preset {
        family: "distance-weak",
        vendor: None,
        mode: CaptureMode::Monitor,
        text: include_str!("../../presets/distance-weak-monitor.toml"),
    },
    Preset {
        family: "traffic",
        vendor: None,
        mode: CaptureMode::Normal,
        text: include_str!("../../presets/traffic-normal.toml"),
    },
    Preset {
        family: "traffic",
        vendor: None,
        mode: CaptureMode::Monitor,
        text: include_str!("../../presets/traffic-monitor.toml"),
    },
    Preset {
        family: "cpu-50",
        vendor: Some("atheros"),
        mode: CaptureMode::Normal,
        text: include_str!("../../presets/cpu-50-atheros-normal.toml"),
    },
    Preset {
        family: "cpu-50",
        vendor: Some("atheros"),
        mode: CaptureMode::Monitor,
        text: include_str!("../../presets/cpu-50-atheros-monitor.toml"),
    },
    Preset {
        family: "cpu-50",
        vendor: Some("ralink"),
        mode: CaptureMode::Normal,
        text: include_str!("../../presets/cpu-50-ralink-normal.toml"),
    },
    Preset {
        family: "cpu-50",
        vendor: Some("ralink"),
        mode: CaptureMode::Monitor,
        text: include_str!("../../presets/cpu-50-ralink-monitor.toml"),
    },
    Preset {
        family: "cpu-80",
        vendor: Some("atheros"),
        mode: CaptureMode::Normal,
        text: include_str!("../../presets/cpu-80-atheros-normal.toml"),
    },
    Preset {
        family: "cpu-80",
        vendor: Some("atheros"),
        mode: CaptureMode::Monitor,
        text: include_str!("../../presets/cpu-80-atheros-monitor.toml"),
    },
    Preset {
        family: "cpu-80",
        vendor: Some("ralink"),
        mode: CaptureMode::Normal,
        text: include_str!("../../presets/cpu-80-ralink-normal.toml"),
    },
    Preset {
        family: "cpu-80",
        vendor: Some("ralink"),
        mode: CaptureMode::Monitor,
        text: include_str!("../../presets/cpu-80-ralink-monitor.toml"),
    },
];

pub const FAMILIES: &[&str] = &["zero-loss", "distance-strong", "distance-weak", "traffic", "cpu-50", "cpu-80"];

pub const VENDORS: &[&str] = &["atheros", "ralink"];

#[derive(Debug, Error, PartialEq)]
pub enum PresetError {
    #[error("unknown preset `{0}`; known: {known}", known = FAMILIES.join(", "))]
    Unknown(String),
    #[error("unknown vendor `{0}`; known: {known}", known = VENDORS.join(", "))]
    UnknownVendor(String),
}

/// Scenarios of a preset family, filtered by mode and vendor. A full preset
/// name such as `cpu-80-ralink-monitor` is accepted too.
pub fn lookup(
    name: &str,
    mode: Option<CaptureMode>,
    vendor: Option<&str>,
) -> Result<Vec<SimScenario>, PresetError> {
    if let Some(v) = vendor {
        if !VENDORS.contains(&v) {
            return Err(PresetError::UnknownVendor(v.to_string()));
        }
    }
    if let Some(p) = PRESETS.iter().find(|p| p.name() == name) {
        return Ok(vec![p.scenario()]);
    }
    if !FAMILIES.contains(&name) {
        return Err(PresetError::Unknown(name.to_string()));
    }
    Ok(PRESETS
        .iter()
        .filter(|p| p.family == name)
        .filter(|p| mode.is_none_or(|m| m == p.mode))
        .filter(|p| match (vendor, p.vendor) {
            (Some(v), Some(pv)) => v == pv,
            _ => true,
        })
        .map(Preset::scenario)
        .collect())
}
