//! Fixed-window views of a session: occupancy, probability of capture and
//! runs of empty windows. Windows are aligned to session start plus an
//! optional offset; a trailing partial window is ignored.

use serde::{Deserialize, Serialize};

use crate::model::{CaptureSession, MacAddr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub width_us: u64,
    pub offset_us: u64,
}

impl WindowSpec {
    pub fn seconds(window_s: f64) -> Self {
        WindowSpec {
            width_us: (window_s * 1e6).round() as u64,
            offset_us: 0,
        }
    }

    pub fn with_offset_s(mut self, offset_s: f64) -> Self {
        self.offset_us = (offset_s * 1e6).round() as u64;
        self
    }

    pub fn count(&self, duration_us: u64) -> usize {
        if self.width_us == 0 {
            return 0;
        }
        (duration_us.saturating_sub(self.offset_us) / self.width_us) as usize
    }
}

/// Per-window record counts for one AP.
pub fn window_occupancy(session: &CaptureSession, bssid: MacAddr, spec: WindowSpec) -> Vec<u32> {
    let n = spec.count(session.duration_us);
    let mut counts = vec![0u32; n];
    if n == 0 {
        return counts;
    }
    for t in session.times_for(bssid) {
        if t < spec.offset_us {
            continue;
        }
        let idx = ((t - spec.offset_us) / spec.width_us) as usize;
        if idx < n {
            counts[idx] += 1;
        }
    }
    counts
}

/// Fraction of windows holding at least one record of the AP. Zero when
/// the session is shorter than one window.
pub fn capture_probability(session: &CaptureSession, bssid: MacAddr, window_s: f64) -> f64 {
    capture_probability_with_offset(session, bssid, WindowSpec::seconds(window_s))
}

pub fn capture_probability_with_offset(
    session: &CaptureSession,
    bssid: MacAddr,
    spec: WindowSpec,
) -> f64 {
    let occ = window_occupancy(session, bssid, spec);
    if occ.is_empty() {
        return 0.0;
    }
    occ.iter().filter(|&&c| c > 0).count() as f64 / occ.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapRun {
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub window_s: f64,
    pub n_windows: usize,
    pub empty_runs: Vec<GapRun>,
    pub max_run: usize,
}

impl GapReport {
    pub fn empty_windows(&self) -> usize {
        self.empty_runs.iter().map(|r| r.len).sum()
    }
}

/// Maximal runs of consecutive empty windows.
pub fn gap_report(session: &CaptureSession, bssid: MacAddr, window_s: f64) -> GapReport {
    gap_report_with_offset(session, bssid, WindowSpec::seconds(window_s))
}

pub fn gap_report_with_offset(session: &CaptureSession, bssid: MacAddr, spec: WindowSpec) -> GapReport {
    let occ = window_occupancy(session, bssid, spec);
    let mut runs = Vec::new();
    let mut current: Option<GapRun> = None;
    for (i, &c) in occ.iter().enumerate() {
        match (c == 0, current.as_mut()) {
            (true, Some(run)) => run.len += 1,
            (true, None) => current = Some(GapRun { start: i, len: 1 }),
            (false, Some(_)) => runs.extend(current.take()),
            (false, None) => {}
        }
    }
    runs.extend(current);
    GapReport {
        window_s: spec.width_us as f64 / 1e6,
        n_windows: occ.len(),
        max_run: runs.iter().map(|r| r.len).max().unwrap_or(0),
        empty_runs: runs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tests::session_with_times;

    const AP: MacAddr = MacAddr([0, 0, 0, 0, 0, 1]);

    #[test]
    fn half_the_windows() {
        let s = session_with_times(&[500_000, 2_500_000], 4_000_000);
        assert_eq!(capture_probability(&s, AP, 1.0), 0.5);
    }

    #[test]
    fn full_coverage() {
        let times: Vec<u64> = (0..40).map(|i| i * 102_400).collect();
        let s = session_with_times(&times, 4_000_000);
        assert_eq!(capture_probability(&s, AP, 1.0), 1.0);
        let g = gap_report(&s, AP, 1.0);
        assert!(g.empty_runs.is_empty());
        assert_eq!(g.max_run, 0);
    }

    #[test]
    fn four_second_gap() {
        let times: Vec<u64> = (0..100u64)
            .filter(|s| !(67..=70).contains(s))
            .map(|s| s * 1_000_000 + 300_000)
            .collect();
        let s = session_with_times(&times, 100_000_000);
        let g = gap_report(&s, AP, 1.0);
        assert_eq!(g.empty_runs, vec![GapRun { start: 67, len: 4 }]);
        assert_eq!(g.max_run, 4);
    }

    #[test]
    fn trailing_run_and_partial_window() {
        // 3.5 s session: windows 0..3, record only in window 0
        let s = session_with_times(&[10, 3_200_000], 3_500_000);
        let g = gap_report(&s, AP, 1.0);
        assert_eq!(g.n_windows, 3);
        assert_eq!(g.empty_runs, vec![GapRun { start: 1, len: 2 }]);
    }

    #[test]
    fn offset_shifts_windows() {
        let s = session_with_times(&[900_000], 3_000_000);
        let spec = WindowSpec::seconds(1.0).with_offset_s(0.95);
        // windows [0.95,1.95) [1.95,2.95): record at 0.9 falls before both
        assert_eq!(capture_probability_with_offset(&s, AP, spec), 0.0);
        assert_eq!(capture_probability(&s, AP, 1.0), 1.0 / 3.0);
    }

    #[test]
    fn shorter_than_window() {
        let s = session_with_times(&[10], 500_000);
        assert_eq!(capture_probability(&s, AP, 1.0), 0.0);
        assert_eq!(gap_report(&s, AP, 1.0).n_windows, 0);
    }
}
