//! Regenerates the shipped scenario presets by calibrating each one against
//! its target rates. Run with
//! `cargo run --release -p beaconrate --example fit_presets -- crates/core/presets`.

use std::path::PathBuf;

use beaconrate::model::{CaptureMode, MacAddr, Ssid};
use beaconrate::sim::{
    calibrate, scenario_to_toml, ApSpec, CalibrationError, CalibrationOptions, CalibrationResult,
    FreeParam, LossModel, RateTarget, RpSpec, SimScenario, Transient,
};

const SEED: u64 = 20240601;
const JITTER_DB: f64 = 3.0;

fn baseline_loss() -> LossModel {
    LossModel {
        rssi_threshold_dbm: -85.0,
        rssi_slope_db: 5.0,
        traffic_loss_prob: 0.0,
        stress_gain: 4.0,
        transient: Transient {
            p_good_to_bad: 0.0004,
            p_bad_to_good: 0.05,
            capture_prob_bad: 0.1,
        },
    }
}

fn ap(last: u8, ssid: &str, rssi: f64) -> ApSpec {
    ApSpec {
        ssid: Ssid::new(ssid.as_bytes()).unwrap(),
        rssi_jitter_db: JITTER_DB,
        channel: Some(6),
        ..ApSpec::new(MacAddr([0x02, 0, 0, 0, 0x01, last]), rssi)
    }
}

fn target(rate: f64, miss: f64) -> RateTarget {
    RateTarget {
        miss_rate_pct: Some(miss),
        ..RateTarget::new(rate)
    }
}

fn single(label: &str, mode: CaptureMode, rssi: f64, rate: f64, miss: f64, loss: LossModel) -> SimScenario {
    let mut s = SimScenario::new(mode, vec![ap(1, "hallway", rssi)], loss);
    s.label = label.to_string();
    s.seed = SEED;
    s.targets.push(target(rate, miss));
    s
}

fn fitted(r: Result<CalibrationResult, CalibrationError>) -> CalibrationResult {
    match r {
        Ok(r) => r,
        Err(CalibrationError::NotConverged(best)) => {
            eprintln!("warning: not converged, max rel error {:.4}", best.max_rel_error());
            *best
        }
        Err(e) => panic!("{e}"),
    }
}

fn report(r: &CalibrationResult) {
    for a in &r.achieved {
        eprintln!(
            "{:<28} target {:>6.3} achieved {:>6.3} miss {:>6.2}%",
            a.label, a.target_rate, a.rate, a.miss_rate_pct
        );
    }
}

fn main() {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "presets".into()).into();
    std::fs::create_dir_all(&out).unwrap();
    let mut scenarios = Vec::new();

    for mode in [CaptureMode::Normal, CaptureMode::Monitor] {
        let mut s = SimScenario::new(mode, vec![ap(1, "hallway", -60.0)], LossModel::lossless());
        s.label = format!("zero-loss-{mode}");
        s.seed = SEED;
        scenarios.push(s);
    }

    // Signal strength: one model per mode shared by both distances.
    let table = [
        (CaptureMode::Normal, (0.91, 7.04), (0.57, 41.67)),
        (CaptureMode::Monitor, (9.68, 0.86), (9.22, 5.63)),
    ];
    let mut signal = Vec::new();
    for (mode, strong, weak) in table {
        let templates = [
            single(&format!("distance-strong-{mode}"), mode, -60.0, strong.0, strong.1, baseline_loss()),
            single(&format!("distance-weak-{mode}"), mode, -80.0, weak.0, weak.1, baseline_loss()),
        ];
        let r = fitted(calibrate(&templates, &CalibrationOptions::default()));
        report(&r);
        signal.push((mode, r.loss));
        scenarios.extend(r.scenarios);
    }

    // Traffic: the signal model of each mode, plus per-AP contention loss.
    let traffic = [
        (CaptureMode::Normal, [(0.90, 7.50), (0.91, 7.09), (0.91, 6.93), (0.91, 7.03)]),
        (CaptureMode::Monitor, [(4.76, 51.25), (7.40, 24.22), (7.42, 24.06), (8.29, 15.10)]),
    ];
    for ((mode, rows), (_, loss)) in traffic.into_iter().zip(&signal) {
        let aps: Vec<ApSpec> = (1..=4u8).map(|i| ap(i, &format!("apartment-{i}"), -56.0)).collect();
        let mut s = SimScenario::new(mode, aps, *loss);
        s.label = format!("traffic-{mode}");
        s.seed = SEED;
        s.rps = [
            ("RP1", 2.0, 3.0, [0.0, -1.0, -2.0, -1.0]),
            ("RP2", 7.5, 4.0, [-2.0, 0.0, -1.0, -2.0]),
            ("RP3", 5.0, 9.0, [-1.0, -2.0, 0.0, 0.0]),
        ]
        .iter()
        .map(|(id, x, y, off)| RpSpec {
            id: id.to_string(),
            x: *x,
            y: *y,
            floor: Some("1".into()),
            rssi_offset_db: off.to_vec(),
        })
        .collect();
        for (a, (rate, miss)) in s.aps.clone().iter().zip(rows) {
            s.targets.push(RateTarget {
                bssid: Some(a.bssid),
                ..target(rate, miss)
            });
        }
        let opts = CalibrationOptions {
            free: (0..4).map(FreeParam::ApTrafficLoss).collect(),
            ..Default::default()
        };
        let r = fitted(calibrate(&[s], &opts));
        report(&r);
        scenarios.extend(r.scenarios);
    }

    // CPU load, weak signal: one fit per vendor, mode and load level.
    let cpu = [
        ("atheros", CaptureMode::Normal, [(0.96, 2.17), (0.86, 11.86)]),
        ("ralink", CaptureMode::Normal, [(0.76, 21.92), (0.69, 29.45)]),
        ("atheros", CaptureMode::Monitor, [(8.76, 10.28), (7.80, 20.17)]),
        ("ralink", CaptureMode::Monitor, [(8.19, 16.13), (5.05, 48.30)]),
    ];
    for (vendor, mode, rows) in cpu {
        let loss = signal.iter().find(|(m, _)| *m == mode).unwrap().1;
        for ((rate, miss), load) in rows.into_iter().zip([50u32, 80]) {
            let mut s = single(&format!("cpu-{load}-{vendor}-{mode}"), mode, -80.0, rate, miss, loss);
            s.cpu_load_factor = load as f64 / 100.0;
            let opts = CalibrationOptions {
                free: vec![FreeParam::Threshold, FreeParam::PGoodToBad],
                ..Default::default()
            };
            let r = fitted(calibrate(&[s], &opts));
            report(&r);
            scenarios.extend(r.scenarios);
        }
    }

    for s in &scenarios {
        let path = out.join(format!("{}.toml", s.label));
        std::fs::write(&path, scenario_to_toml(s)).unwrap();
    }
    eprintln!("wrote {} presets to {}", scenarios.len(), out.display());
}
