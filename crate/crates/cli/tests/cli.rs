use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn beaconrate(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beaconrate"))
        .args(args)
        .current_dir(cwd)
        .env_remove("BEACONRATE_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

/// Field `col` of the first data row of a CSV report.
fn first_row_field(csv: &str, col: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<_> = lines.next().unwrap().split(',').collect();
    let row: Vec<_> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == col).unwrap();
    row[i].to_string()
}

const ONE_AP: &str = r#"
label = "one"
mode = "normal"
runs = 2
duration_s = 50.0

[loss]
rssi_threshold_dbm = -70.0
rssi_slope_db = 5.0

[[aps]]
bssid = "02:00:00:00:00:01"
mean_rssi = -72.0
"#;

#[test]
fn zero_loss_monitor_preset_hits_theoretical_rate() {
    let dir = TempDir::new().unwrap();
    let o = beaconrate(
        &["simulate", "--preset", "zero-loss", "--mode", "monitor", "--runs", "1", "--out", "o"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = read(dir.path().join("o/zero-loss-monitor/report.csv"));
    assert_eq!(first_row_field(&csv, "avg_rate_pps"), "9.7700");
    assert_eq!(first_row_field(&csv, "miss_rate_pct"), "0.00");
    assert_eq!(first_row_field(&csv, "p_capture_1s"), "1.0000");
    assert!(dir.path().join("o/zero-loss-monitor/runs/run00.pcap").exists());
}

#[test]
fn simulated_pcaps_analyze_to_the_same_rates() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("one.toml"), ONE_AP).unwrap();
    let o = beaconrate(&["simulate", "--scenario", "one.toml", "--out", "o"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = beaconrate(
        &[
            "analyze", "--input", "o/one/runs", "--mode", "normal", "--origin-us", "0", "--duration-s", "50",
            "--out", "a",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sim = read(dir.path().join("o/one/report.csv"));
    let ana = read(dir.path().join("a/report.csv"));
    assert_eq!(first_row_field(&sim, "avg_rate_pps"), first_row_field(&ana, "avg_rate_pps"));
    assert_eq!(first_row_field(&sim, "p_capture_2s"), first_row_field(&ana, "p_capture_2s"));
    assert!(dir.path().join("a/histogram.csv").exists());
    assert!(dir.path().join("a/gaps.csv").exists());
}

#[test]
fn fixed_seed_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("one.toml"), ONE_AP).unwrap();
    for out in ["r1", "r2"] {
        let o = beaconrate(
            &["simulate", "--scenario", "one.toml", "--seed", "7", "--no-header-timestamp", "--out", out],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["report.csv", "report.json", "report.txt", "histogram.csv", "gaps.csv", "scenario.toml"] {
        assert_eq!(read(dir.path().join("r1/one").join(f)), read(dir.path().join("r2/one").join(f)), "{f}");
    }
    for f in ["run00.pcap", "run01.pcap"] {
        let a = std::fs::read(dir.path().join("r1/one/runs").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("r2/one/runs").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let other = beaconrate(
        &["simulate", "--scenario", "one.toml", "--seed", "8", "--no-header-timestamp", "--out", "r3"],
        dir.path(),
    );
    assert_eq!(code(&other), 0);
    assert_ne!(
        std::fs::read(dir.path().join("r1/one/runs/run00.pcap")).unwrap(),
        std::fs::read(dir.path().join("r3/one/runs/run00.pcap")).unwrap()
    );
}

#[test]
fn timestamp_line_is_optional() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("one.toml"), ONE_AP).unwrap();
    let o = beaconrate(&["simulate", "--scenario", "one.toml", "--emit", "none", "--out", "t"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(read(dir.path().join("t/one/report.txt")).starts_with("# generated "));
    let o = beaconrate(
        &["simulate", "--scenario", "one.toml", "--emit", "none", "--no-header-timestamp", "--out", "n"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(read(dir.path().join("n/one/report.txt")).starts_with("scenario: one"));
    assert!(!dir.path().join("n/one/runs").exists());
}

#[test]
fn empty_directory_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let o = beaconrate(&["analyze", "--input", "empty", "--mode", "normal"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no input files"), "{}", stderr(&o));
}

#[test]
fn unreadable_files_are_skipped_not_fatal() {
    let dir = TempDir::new().unwrap();
    let o = beaconrate(
        &["simulate", "--preset", "zero-loss", "--mode", "monitor", "--runs", "1", "--out", "o"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let runs = dir.path().join("o/zero-loss-monitor/runs");
    std::fs::write(runs.join("broken.pcap"), b"not a capture").unwrap();
    let o = beaconrate(
        &["analyze", "--input", "o/zero-loss-monitor/runs", "--mode", "monitor", "--out", "a"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("broken.pcap"), "{}", stderr(&o));
    let csv = read(dir.path().join("a/report.csv"));
    assert_eq!(first_row_field(&csv, "avg_rate_pps"), "9.7700");

    std::fs::remove_file(runs.join("run00.pcap")).unwrap();
    let o = beaconrate(
        &["analyze", "--input", "o/zero-loss-monitor/runs", "--mode", "monitor", "--out", "a"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn invalid_scenario_names_the_field() {
    let dir = TempDir::new().unwrap();
    let bad = ONE_AP.replace("rssi_slope_db = 5.0", "rssi_slope_db = 0.0");
    std::fs::write(dir.path().join("bad.toml"), bad).unwrap();
    let o = beaconrate(&["simulate", "--scenario", "bad.toml"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("loss.rssi_slope_db"), "{}", stderr(&o));

    let unknown = ONE_AP.replace("mean_rssi", "mean_rss");
    std::fs::write(dir.path().join("unknown.toml"), unknown).unwrap();
    let o = beaconrate(&["simulate", "--scenario", "unknown.toml"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("mean_rss"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&beaconrate(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&beaconrate(&["analyze", "--input", "x"], dir.path())), 1);
    assert_eq!(
        code(&beaconrate(&["analyze", "--input", "x", "--mode", "normal", "--windows", "0"], dir.path())),
        1
    );
    assert_eq!(code(&beaconrate(&["simulate", "--preset", "nonesuch"], dir.path())), 1);
    assert_eq!(code(&beaconrate(&["simulate"], dir.path())), 1);
    assert_eq!(code(&beaconrate(&["--help"], dir.path())), 0);
}

const TARGETED: &str = r#"
label = "weak"
mode = "normal"
runs = 3

[loss]
rssi_threshold_dbm = -70.0
rssi_slope_db = 5.0

[[aps]]
bssid = "02:00:00:00:00:01"
mean_rssi = -80.0

[[targets]]
rate = 0.57
miss_rate_pct = 41.67
"#;

#[test]
fn calibrate_writes_annotated_scenario() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("weak.toml"), TARGETED).unwrap();
    let o = beaconrate(&["calibrate", "--scenario", "weak.toml", "--out", "c"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = read(dir.path().join("c/weak.calibrated.toml"));
    let achieved: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("achieved_rate = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((achieved - 0.57).abs() / 0.57 <= 0.02, "{achieved}");

    // The calibrated file is itself a valid scenario.
    let o = beaconrate(
        &["simulate", "--scenario", "c/weak.calibrated.toml", "--emit", "none", "--out", "s"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn infeasible_target_fails() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("x.toml"), TARGETED.replace("rate = 0.57", "rate = 1.5")).unwrap();
    let o = beaconrate(&["calibrate", "--scenario", "x.toml", "--out", "c"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("exceeds"), "{}", stderr(&o));
}

#[test]
fn non_convergence_exits_three_with_best_parameters() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("weak.toml"), TARGETED).unwrap();
    let o = beaconrate(
        &["calibrate", "--scenario", "weak.toml", "--max-evaluations", "2", "--tolerance", "0.0001", "--out", "c"],
        dir.path(),
    );
    assert_eq!(code(&o), 3);
    assert!(read(dir.path().join("c/weak.calibrated.toml")).contains("achieved_rate"));
}

#[test]
fn zero_loss_target_drives_loss_away() {
    let dir = TempDir::new().unwrap();
    let zero = TARGETED
        .replace("rate = 0.57", "rate = 0.975")
        .replace("miss_rate_pct = 41.67", "miss_rate_pct = 0.16");
    std::fs::write(dir.path().join("z.toml"), zero).unwrap();
    let o = beaconrate(
        &["calibrate", "--scenario", "z.toml", "--free", "threshold", "--out", "c"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = read(dir.path().join("c/weak.calibrated.toml"));
    let threshold: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("rssi_threshold_dbm = "))
        .unwrap()
        .parse()
        .unwrap();
    // With slope 5 dB the AP at -80 dBm is heard with probability > 0.99.
    assert!(threshold < -80.0 - 5.0 * 99f64.ln(), "{threshold}");
}

#[test]
fn report_rerenders_stored_json() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("one.toml"), ONE_AP).unwrap();
    let o = beaconrate(
        &["simulate", "--scenario", "one.toml", "--emit", "none", "--no-header-timestamp", "--out", "o"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let o = beaconrate(
        &["report", "--input", "o/one/report.json", "--no-header-timestamp", "--format", "text,csv", "--out", "r"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(dir.path().join("r/report.txt")), read(dir.path().join("o/one/report.txt")));
    assert_eq!(read(dir.path().join("r/report.csv")), read(dir.path().join("o/one/report.csv")));
    assert!(!dir.path().join("r/report.json").exists());

    std::fs::write(dir.path().join("junk.json"), "{").unwrap();
    assert_eq!(code(&beaconrate(&["report", "--input", "junk.json"], dir.path())), 2);
}

#[test]
fn output_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("one.toml"), ONE_AP).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_beaconrate"))
        .args(["simulate", "--scenario", "one.toml", "--emit", "none", "--format", "json"])
        .current_dir(dir.path())
        .env("BEACONRATE_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("from-env/one/report.json").exists());
    assert!(!dir.path().join("from-env/one/report.csv").exists());
}

#[test]
fn radiomap_from_tagged_captures() {
    let dir = TempDir::new().unwrap();
    let o = beaconrate(
        &["simulate", "--preset", "zero-loss", "--mode", "normal", "--runs", "1", "--out", "o"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    std::fs::write(dir.path().join("points.toml"), "[[rps]]\nid = \"A\"\nx = 1.5\ny = 2.0\n").unwrap();
    let o = beaconrate(
        &[
            "radiomap",
            "--input",
            "A=o/zero-loss-normal/runs/run00.pcap",
            "--input-mode",
            "normal",
            "--points",
            "points.toml",
            "--out",
            "m",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let map = read(dir.path().join("m/radiomap.csv"));
    assert!(map.lines().nth(1).unwrap().starts_with("A,1.5,2,"), "{map}");
    let survey = read(dir.path().join("m/survey.csv"));
    let row: Vec<&str> = survey.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..2], ["A", "02:00:00:00:01:01"]);
    let rate: f64 = row[2].parse().unwrap();
    let secs: f64 = row[4].parse().unwrap();
    // 195 beacons over a span measured from the first one.
    assert!(rate > 0.97 && rate < 0.99, "{survey}");
    assert!((secs - 100.0 / rate).abs() < 0.1, "{survey}");
}

#[test]
fn radiomap_from_preset_with_reference_points() {
    let dir = TempDir::new().unwrap();
    let o = beaconrate(
        &["radiomap", "--preset", "traffic", "--mode", "normal", "--runs", "1", "--out", "m"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let map = read(dir.path().join("m/traffic-normal/radiomap.csv"));
    let rps: std::collections::BTreeSet<_> = map.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rps.len(), 3, "{map}");
}
