use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::histogram::{arrival_delay_histogram, DelayHistogram, DEFAULT_BIN_WIDTH_MS};
use super::windows::{capture_probability_with_offset, gap_report_with_offset, GapReport, WindowSpec};
use super::{measurement_rate, miss_rate, MetricsError};
use crate::model::{
    theoretical_rate, ApIdentity, CaptureMode, CaptureSession, MacAddr, RunSet,
    DEFAULT_BEACON_INTERVAL_TU, DEFAULT_REPORT_INTERVAL_TU,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub windows_s: Vec<f64>,
    pub bin_width_ms: f64,
    pub report_interval_tu: u32,
    pub window_offset_s: f64,
    /// Average per reference point first, then across reference points.
    pub group_by_rp: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            windows_s: vec![1.0, 2.0],
            bin_width_ms: DEFAULT_BIN_WIDTH_MS,
            report_interval_tu: DEFAULT_REPORT_INTERVAL_TU,
            window_offset_s: 0.0,
            group_by_rp: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowProbability {
    pub window_s: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub ap: ApIdentity,
    pub beacon_interval_tu: u16,
    pub theoretical_rate: f64,
    pub avg_rate: f64,
    pub miss_rate_pct: f64,
    pub per_run_rates: Vec<f64>,
    pub capture_probability: Vec<WindowProbability>,
    /// Sum over runs.
    pub histogram: DelayHistogram,
    /// One gap report per run, at the first configured window.
    pub gaps: Vec<GapReport>,
    pub max_gap_windows: usize,
}

impl ApReport {
    pub fn capture_probability_at(&self, window_s: f64) -> Option<f64> {
        self.capture_probability
            .iter()
            .find(|w| (w.window_s - window_s).abs() < 1e-9)
            .map(|w| w.p)
    }

    pub fn max_gap_s(&self) -> f64 {
        let w = self.gaps.first().map_or(1.0, |g| g.window_s);
        self.max_gap_windows as f64 * w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub label: String,
    pub mode: CaptureMode,
    pub runs: usize,
    pub duration_s: f64,
    pub options: ReportOptions,
    pub aps: Vec<ApReport>,
}

impl ScenarioReport {
    pub fn ap(&self, bssid: MacAddr) -> Option<&ApReport> {
        self.aps.iter().find(|a| a.ap.bssid == bssid)
    }
}

/// Mean of values, optionally as a mean of per-group means.
fn grouped_mean(values: &[(Option<&str>, f64)], group: bool) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    if !group {
        return values.iter().map(|(_, v)| v).sum::<f64>() / values.len() as f64;
    }
    let mut groups: BTreeMap<Option<&str>, (f64, usize)> = BTreeMap::new();
    for (k, v) in values {
        let e = groups.entry(*k).or_default();
        e.0 += v;
        e.1 += 1;
    }
    groups.values().map(|(s, n)| s / *n as f64).sum::<f64>() / groups.len() as f64
}

fn dominant_interval(runs: &[CaptureSession], bssid: MacAddr) -> u16 {
    let mut counts = BTreeMap::<u16, usize>::new();
    for r in runs.iter().flat_map(|s| s.records.iter()) {
        if r.ap.bssid == bssid && r.beacon_interval_tu > 0 {
            *counts.entry(r.beacon_interval_tu).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by_key(|(tu, n)| (*n, std::cmp::Reverse(*tu)))
        .map(|(tu, _)| tu)
        .unwrap_or(DEFAULT_BEACON_INTERVAL_TU)
}

/// Combines repeated runs into per-AP averages. Rates (and capture
/// probabilities) are averaged across runs, miss-rate is recomputed from
/// the averaged rate, histograms are summed.
pub fn aggregate_runs(runset: &RunSet, opts: &ReportOptions) -> Result<ScenarioReport, MetricsError> {
    let first = runset.runs.first().ok_or(MetricsError::EmptyRunSet)?;
    if !runset.is_consistent() {
        return Err(MetricsError::InconsistentRunSet);
    }
    if opts.bin_width_ms <= 0.0 || opts.windows_s.iter().any(|w| *w <= 0.0) {
        return Err(MetricsError::NonPositiveWidth);
    }
    let mode = first.mode;

    let mut aps = BTreeMap::new();
    for s in &runset.runs {
        for ap in s.aps() {
            aps.entry(ap.bssid).or_insert(ap);
        }
    }

    let specs: Vec<WindowSpec> = opts
        .windows_s
        .iter()
        .map(|w| WindowSpec::seconds(*w).with_offset_s(opts.window_offset_s))
        .collect();

    let reports = aps
        .into_values()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|ap| {
            let bssid = ap.bssid;
            let labels: Vec<Option<&str>> = runset
                .runs
                .iter()
                .map(|s| s.meta.label.rp.as_deref())
                .collect();

            let per_run_rates: Vec<f64> =
                runset.runs.iter().map(|s| measurement_rate(s, bssid)).collect();
            let tagged: Vec<_> = labels.iter().copied().zip(per_run_rates.iter().copied()).collect();
            let avg_rate = grouped_mean(&tagged, opts.group_by_rp);

            let interval = dominant_interval(&runset.runs, bssid);
            let theoretical = theoretical_rate(mode, interval as u32, opts.report_interval_tu)
                .map_err(|_| MetricsError::NonPositiveWidth)?;
            let miss = miss_rate(avg_rate, theoretical)?;

            let capture_probability = specs
                .iter()
                .zip(&opts.windows_s)
                .map(|(spec, w)| {
                    let ps: Vec<_> = runset
                        .runs
                        .iter()
                        .zip(&labels)
                        .map(|(s, l)| (*l, capture_probability_with_offset(s, bssid, *spec)))
                        .collect();
                    WindowProbability {
                        window_s: *w,
                        p: grouped_mean(&ps, opts.group_by_rp),
                    }
                })
                .collect();

            let mut histogram = DelayHistogram::empty(opts.bin_width_ms);
            for s in &runset.runs {
                histogram.merge(&arrival_delay_histogram(s, bssid, opts.bin_width_ms));
            }

            let gaps: Vec<GapReport> = match specs.first() {
                Some(spec) => runset
                    .runs
                    .iter()
                    .map(|s| gap_report_with_offset(s, bssid, *spec))
                    .collect(),
                None => Vec::new(),
            };
            let max_gap_windows = gaps.iter().map(|g| g.max_run).max().unwrap_or(0);

            Ok(ApReport {
                ap: *ap,
                beacon_interval_tu: interval,
                theoretical_rate: theoretical,
                avg_rate,
                miss_rate_pct: miss,
                per_run_rates,
                capture_probability,
                histogram,
                gaps,
                max_gap_windows,
            })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;

    Ok(ScenarioReport {
        label: runset.label.clone(),
        mode,
        runs: runset.runs.len(),
        duration_s: runset.mean_duration_s(),
        options: opts.clone(),
        aps: reports,
    })
}
