//! Capture-quality metrics over sessions: measurement rate, miss-rate,
//! arrival-delay histograms, empty-window gaps, probability of capture,
//! and aggregation of repeated runs into a scenario report.

mod aggregate;
mod histogram;
pub mod report;
mod windows;

pub use aggregate::{aggregate_runs, ApReport, ReportOptions, ScenarioReport, WindowProbability};
pub use histogram::{arrival_delay_histogram, DelayHistogram, DEFAULT_BIN_WIDTH_MS};
pub use windows::{
    capture_probability, capture_probability_with_offset, gap_report, gap_report_with_offset,
    window_occupancy, GapReport, GapRun, WindowSpec,
};

use thiserror::Error;

use crate::model::{CaptureSession, MacAddr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("theoretical rate must be positive, got {0}")]
    NonPositiveTheoretical(f64),
    #[error("run set is empty")]
    EmptyRunSet,
    #[error("runs disagree on capture mode")]
    InconsistentRunSet,
    #[error("window and bin widths must be positive")]
    NonPositiveWidth,
}

/// Records per second for one AP over the whole session.
pub fn measurement_rate(session: &CaptureSession, bssid: MacAddr) -> f64 {
    if session.duration_us == 0 {
        return 0.0;
    }
    let n = session.times_for(bssid).count();
    n as f64 / session.duration_s()
}

/// Shortfall of `rate` against `theoretical`, in percent, floored at 0.
pub fn miss_rate(rate: f64, theoretical: f64) -> Result<f64, MetricsError> {
    if theoretical.is_nan() || theoretical <= 0.0 {
        return Err(MetricsError::NonPositiveTheoretical(theoretical));
    }
    Ok((1.0 - rate / theoretical).max(0.0) * 100.0)
}
