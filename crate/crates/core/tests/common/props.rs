//! Metric and simulator properties as plain checks, shared by the
//! property tests and the acceptance suite.

use beaconrate::metrics::{arrival_delay_histogram, capture_probability, gap_report, measurement_rate};
use beaconrate::model::{theoretical_rate, CaptureMode, MacAddr};
use beaconrate::sim::{beacon_schedule, simulate, ApSpec, LossModel, SimScenario, Transient};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::{session_from_times, AP};

pub fn mode() -> impl Strategy<Value = CaptureMode> {
    prop_oneof![Just(CaptureMode::Normal), Just(CaptureMode::Monitor)]
}

pub fn loss_model() -> impl Strategy<Value = LossModel> {
    (
        -100.0..-50.0f64,
        0.5..15.0f64,
        0.0..0.5f64,
        0.0..5.0f64,
        (0.0..0.05f64, 0.01..1.0f64, 0.0..1.0f64),
    )
        .prop_map(|(th, slope, traffic, gain, (gb, bg, pb))| LossModel {
            rssi_threshold_dbm: th,
            rssi_slope_db: slope,
            traffic_loss_prob: traffic,
            stress_gain: gain,
            transient: Transient {
                p_good_to_bad: gb,
                p_bad_to_good: bg,
                capture_prob_bad: pb,
            },
        })
}

fn ap_spec(i: u8) -> impl Strategy<Value = ApSpec> {
    (
        prop_oneof![Just(100u16), 20u16..400],
        any::<u64>(),
        -100.0..-35.0f64,
        0.0..6.0f64,
        proptest::option::of(0.0..0.6f64),
    )
        .prop_map(move |(bi, phase, rssi, jitter, traffic)| ApSpec {
            beacon_interval_tu: bi,
            phase_offset_us: phase % (bi as u64 * 1024),
            rssi_jitter_db: jitter,
            traffic_loss_prob: traffic,
            ..ApSpec::new(MacAddr([2, 0, 0, 0, 0, i]), rssi)
        })
}

/// Small random scenarios: 1-3 APs, 2-29 s, 1-2 runs.
pub fn scenario() -> impl Strategy<Value = SimScenario> {
    (
        mode(),
        (1u8..4).prop_flat_map(|n| (0..n).map(ap_spec).collect::<Vec<_>>()),
        loss_model(),
        any::<u64>(),
        2u32..30,
        1u32..3,
        0.0..1.0f64,
        prop_oneof![Just(1000u32), 300u32..2000],
    )
        .prop_map(|(mode, aps, loss, seed, dur, runs, cpu, report)| {
            let mut s = SimScenario::new(mode, aps, loss);
            s.seed = seed;
            s.duration_s = dur as f64;
            s.runs = runs;
            s.cpu_load_factor = cpu;
            s.report_interval_tu = report;
            s
        })
}

/// (duration, record times, W): the duration is a whole number of 2W
/// windows so that W and 2W windows cover the same span.
pub fn aligned_session() -> impl Strategy<Value = (u64, Vec<u64>, f64)> {
    (
        proptest::collection::btree_set(0u64..1_000_000_000, 0..300),
        prop_oneof![Just(500u64), Just(1000u64), 100u64..3000],
        1u64..30,
    )
        .prop_map(|(times, half_w_ms, k)| {
            let w_us = half_w_ms * 1000;
            let dur = 2 * w_us * k;
            let times = times.into_iter().filter(|t| *t < dur).collect();
            (dur, times, w_us as f64 / 1e6)
        })
}

pub fn histogram_conservation(dur: u64, times: &[u64], width_ms: f64) -> Result<(), TestCaseError> {
    let s = session_from_times(CaptureMode::Monitor, dur, times);
    let h = arrival_delay_histogram(&s, AP, width_ms);
    let expected = times.len().saturating_sub(1) as u64;
    prop_assert_eq!(h.n_deltas, expected);
    prop_assert_eq!(h.bins.values().sum::<u64>(), expected);
    Ok(())
}

pub fn window_monotonicity(dur: u64, times: &[u64], w: f64) -> Result<(), TestCaseError> {
    let s = session_from_times(CaptureMode::Normal, dur, times);
    let p1 = capture_probability(&s, AP, w);
    let p2 = capture_probability(&s, AP, 2.0 * w);
    prop_assert!(p2 >= p1, "p(2W)={} < p(W)={}", p2, p1);
    Ok(())
}

pub fn markov_bound(dur: u64, times: &[u64], w: f64) -> Result<(), TestCaseError> {
    let s = session_from_times(CaptureMode::Normal, dur, times);
    let rate = measurement_rate(&s, AP);
    for width in [w, 2.0 * w] {
        let p = capture_probability(&s, AP, width);
        prop_assert!(p <= rate * width + 1e-12, "p({})={} > rate*W={}", width, p, rate * width);
    }
    Ok(())
}

pub fn gap_probability_consistency(dur: u64, times: &[u64], w: f64) -> Result<(), TestCaseError> {
    let s = session_from_times(CaptureMode::Normal, dur, times);
    let g = gap_report(&s, AP, w);
    let p = capture_probability(&s, AP, w);
    if g.n_windows > 0 {
        let empty = g.n_windows as f64 * (1.0 - p);
        prop_assert!((g.empty_windows() as f64 - empty).abs() < 1e-6);
    }
    let mut next_free = 0;
    for r in &g.empty_runs {
        prop_assert!(r.len >= 1);
        // Maximal runs are separated by at least one occupied window.
        prop_assert!(r.start >= next_free);
        next_free = r.start + r.len + 1;
    }
    prop_assert!(next_free <= g.n_windows + 1);
    prop_assert_eq!(g.max_run, g.empty_runs.iter().map(|r| r.len).max().unwrap_or(0));
    Ok(())
}

pub fn deterministic_by_seed(s: &SimScenario) -> Result<(), TestCaseError> {
    let a = simulate(s).unwrap();
    let b = simulate(s).unwrap();
    prop_assert_eq!(&a, &b);
    for run in &a.runs {
        prop_assert!(run.check_invariants().is_ok(), "{:?}", run.check_invariants());
    }
    Ok(())
}

/// Never more records than the schedule allows: one per complete report
/// slot in normal mode, one per beacon in monitor mode.
pub fn rate_cap(s: &SimScenario) -> Result<(), TestCaseError> {
    let rs = simulate(s).unwrap();
    for run in &rs.runs {
        for ap in &s.aps {
            let n = run.times_for(ap.bssid).count() as u64;
            let cap = match s.mode {
                CaptureMode::Normal => s.duration_us() / (s.report_interval_tu as u64 * 1024),
                CaptureMode::Monitor => beacon_schedule(ap, s.duration_us()).len() as u64,
            };
            prop_assert!(n <= cap, "{} > {}", n, cap);
            if s.mode == CaptureMode::Normal {
                let theo = theoretical_rate(s.mode, ap.beacon_interval_tu as u32, s.report_interval_tu).unwrap();
                prop_assert!(measurement_rate(run, ap.bssid) <= theo + 1e-12);
            }
        }
    }
    Ok(())
}
