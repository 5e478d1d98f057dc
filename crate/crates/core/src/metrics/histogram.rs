use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{CaptureSession, MacAddr};

/// Separates the 102.4 ms monitor lobe from zero and resolves the 1024 and
/// 2048 ms normal-mode lobes.
pub const DEFAULT_BIN_WIDTH_MS: f64 = 25.0;

/// Histogram of delays between consecutive records of one AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayHistogram {
    pub bin_width_ms: f64,
    /// Bin index (`delay / bin_width`, floored) to count.
    pub bins: BTreeMap<u64, u64>,
    pub n_deltas: u64,
}

impl DelayHistogram {
    pub fn empty(bin_width_ms: f64) -> Self {
        DelayHistogram {
            bin_width_ms,
            bins: BTreeMap::new(),
            n_deltas: 0,
        }
    }

    pub fn bin_width_us(&self) -> u64 {
        ((self.bin_width_ms * 1000.0).round() as u64).max(1)
    }

    pub fn add_delta_us(&mut self, delta_us: u64) {
        *self.bins.entry(delta_us / self.bin_width_us()).or_default() += 1;
        self.n_deltas += 1;
    }

    /// Adds another histogram's counts. Bin widths must match.
    pub fn merge(&mut self, other: &DelayHistogram) {
        debug_assert_eq!(self.bin_width_us(), other.bin_width_us());
        for (bin, n) in &other.bins {
            *self.bins.entry(*bin).or_default() += n;
        }
        self.n_deltas += other.n_deltas;
    }

    /// Lower edge of a bin in milliseconds.
    pub fn bin_start_ms(&self, bin: u64) -> f64 {
        (bin * self.bin_width_us()) as f64 / 1000.0
    }

    pub fn total(&self) -> u64 {
        self.bins.values().sum()
    }

    /// Share of deltas falling in bins whose lower edge is below `ms`.
    pub fn fraction_below_ms(&self, ms: f64) -> f64 {
        if self.n_deltas == 0 {
            return 0.0;
        }
        let n: u64 = self
            .bins
            .iter()
            .filter(|(b, _)| self.bin_start_ms(**b) < ms)
            .map(|(_, n)| n)
            .sum();
        n as f64 / self.n_deltas as f64
    }
}

/// Fewer than two records give an empty histogram, not an error: sparse
/// APs are normal in busy environments.
pub fn arrival_delay_histogram(
    session: &CaptureSession,
    bssid: MacAddr,
    bin_width_ms: f64,
) -> DelayHistogram {
    let mut h = DelayHistogram::empty(bin_width_ms);
    let mut prev = None;
    for t in session.times_for(bssid) {
        if let Some(p) = prev {
            h.add_delta_us(t - p);
        }
        prev = Some(t);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tests::session_with_times;

    const AP: MacAddr = MacAddr([0, 0, 0, 0, 0, 1]);

    #[test]
    fn perfect_monitor_stream_single_bin() {
        let times: Vec<u64> = (0..100).map(|i| i * 102_400).collect();
        let h = arrival_delay_histogram(&session_with_times(&times, 20_000_000), AP, 25.0);
        assert_eq!(h.bins.len(), 1);
        let (&bin, &n) = h.bins.iter().next().unwrap();
        assert_eq!(n, 99);
        assert!(h.bin_start_ms(bin) <= 102.4 && 102.4 < h.bin_start_ms(bin + 1));
    }

    #[test]
    fn one_missed_normal_slot_lands_near_two_seconds() {
        let mut times: Vec<u64> = (0..10).map(|i| i * 1_024_000).collect();
        times.remove(5);
        let h = arrival_delay_histogram(&session_with_times(&times, 20_000_000), AP, 25.0);
        assert_eq!(h.n_deltas, 8);
        assert_eq!(h.bins[&(1_024_000 / 25_000)], 7);
        assert_eq!(h.bins[&(2_048_000 / 25_000)], 1);
    }

    #[test]
    fn minimal_and_empty_cases() {
        let h = arrival_delay_histogram(&session_with_times(&[0, 500_000], 1_000_000), AP, 25.0);
        assert_eq!(h.n_deltas, 1);
        assert_eq!(h.bins.len(), 1);
        let h = arrival_delay_histogram(&session_with_times(&[0], 1_000_000), AP, 25.0);
        assert_eq!(h.n_deltas, 0);
        assert!(h.bins.is_empty());
    }
}
