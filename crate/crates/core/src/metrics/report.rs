//! Report rendering: CSV tables, JSON, and a plain-text summary.

use std::fmt::Write as _;

use super::aggregate::ScenarioReport;
use crate::model::display_rate;

/// Column label for a window width: `1` for 1 s, `0.5` for 500 ms.
fn window_label(w: f64) -> String {
    let s = format!("{w}");
    s.trim_end_matches(".0").to_string()
}

pub fn csv_header(report: &ScenarioReport) -> String {
    let mut cols = vec![
        "ap".to_string(),
        "mode".into(),
        "avg_rate_pps".into(),
        "miss_rate_pct".into(),
    ];
    for w in &report.options.windows_s {
        cols.push(format!("p_capture_{}s", window_label(*w)));
    }
    cols.push("max_gap_s".into());
    cols.join(",")
}

/// One row per AP: `ap,mode,avg_rate_pps,miss_rate_pct,p_capture_<w>s...,max_gap_s`.
pub fn to_csv(report: &ScenarioReport) -> String {
    let mut out = csv_header(report);
    out.push('\n');
    for ap in &report.aps {
        let _ = write!(
            out,
            "{},{},{:.4},{:.2}",
            ap.ap.bssid, report.mode, ap.avg_rate, ap.miss_rate_pct
        );
        for wp in &ap.capture_probability {
            let _ = write!(out, ",{:.4}", wp.p);
        }
        let _ = writeln!(out, ",{}", ap.max_gap_s());
    }
    out
}

/// Histogram data for external plotting: `ap,bin_start_ms,bin_end_ms,count`.
pub fn histogram_csv(report: &ScenarioReport) -> String {
    let mut out = String::from("ap,bin_start_ms,bin_end_ms,count\n");
    for ap in &report.aps {
        let h = &ap.histogram;
        for (bin, n) in &h.bins {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                ap.ap.bssid,
                h.bin_start_ms(*bin),
                h.bin_start_ms(bin + 1),
                n
            );
        }
    }
    out
}

/// Every empty-window run: `ap,run,window_s,start_window,length_windows`.
pub fn gaps_csv(report: &ScenarioReport) -> String {
    let mut out = String::from("ap,run,window_s,start_window,length_windows\n");
    for ap in &report.aps {
        for (run, g) in ap.gaps.iter().enumerate() {
            for r in &g.empty_runs {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    ap.ap.bssid,
                    run,
                    window_label(g.window_s),
                    r.start,
                    r.len
                );
            }
        }
    }
    out
}

pub fn to_json(report: &ScenarioReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn from_json(text: &str) -> Result<ScenarioReport, serde_json::Error> {
    serde_json::from_str(text)
}

/// Human-readable summary. `generated` adds a leading timestamp comment.
pub fn to_text(report: &ScenarioReport, generated: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(g) = generated {
        let _ = writeln!(out, "# generated {g}");
    }
    let _ = writeln!(out, "scenario: {}", report.label);
    let _ = writeln!(out, "mode: {}", report.mode);
    let _ = writeln!(out, "runs: {}", report.runs);
    let _ = writeln!(out, "duration_s: {}", report.duration_s);
    let _ = writeln!(out, "bin_width_ms: {}", report.options.bin_width_ms);
    let _ = writeln!(out, "aps:");
    for ap in &report.aps {
        let _ = writeln!(out, "  {} ({})", ap.ap.bssid, ap.ap.ssid);
        let _ = writeln!(
            out,
            "    theoretical_rate_pps: {}",
            display_rate(ap.theoretical_rate)
        );
        let _ = writeln!(out, "    avg_rate_pps: {:.2}", ap.avg_rate);
        let _ = writeln!(out, "    miss_rate_pct: {:.2}", ap.miss_rate_pct);
        for wp in &ap.capture_probability {
            let _ = writeln!(
                out,
                "    p_capture_{}s: {:.1}%",
                window_label(wp.window_s),
                wp.p * 100.0
            );
        }
        let _ = writeln!(out, "    max_gap_s: {}", ap.max_gap_s());
        let _ = writeln!(out, "    delays: {} deltas", ap.histogram.n_deltas);
        let top: Vec<_> = {
            let mut bins: Vec<_> = ap.histogram.bins.iter().collect();
            bins.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
            bins.into_iter().take(3).collect()
        };
        for (bin, n) in top {
            let _ = writeln!(
                out,
                "      {:>8.1} ms  {}",
                ap.histogram.bin_start_ms(*bin),
                n
            );
        }
    }
    out
}
