use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use beaconrate::frame_codec::{read_input_file, write_capture_file, write_csv_file, ReadOptions, ReceiverClock};
use beaconrate::metrics::{aggregate_runs, report, ReportOptions, ScenarioReport};
use beaconrate::model::DEFAULT_REPORT_INTERVAL_TU;
use beaconrate::radiomap::{build_radiomap, export_radiomap, survey_time_estimate, ReferencePoint};
use beaconrate::sim::{
    calibrate_by_mode, load_scenario, presets, scenario_to_toml, simulate, CalibrationError,
    CalibrationOptions, CalibrationResult, FreeParam, RpSpec, SimScenario,
};
use beaconrate::{CaptureMode, CaptureSession, RunSet};
use serde::Deserialize;

use crate::output::{create_dir, write_file, write_report};
use crate::{Cli, Command, Emit, Failure, GlobalArgs, MetricArgs, PresetArgs};

pub fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match cli.command {
        Command::Analyze {
            input,
            mode,
            label,
            duration_s,
            origin_us,
            tsft,
            group_by_rp,
            metrics,
        } => {
            let read = ReadOptions {
                clock: if tsft {
                    ReceiverClock::RadiotapTsft
                } else {
                    ReceiverClock::CaptureHeader
                },
                mode,
                origin_us,
                duration_us: duration_us(duration_s)?,
            };
            analyze(g, &input, &read, label, group_by_rp, &metrics)
        }
        Command::Simulate { source, emit, metrics } => simulate_cmd(g, &source, emit, &metrics),
        Command::Calibrate {
            source,
            tolerance,
            free,
            max_evaluations,
        } => calibrate_cmd(g, &source, tolerance, &free, max_evaluations),
        Command::Radiomap {
            source,
            input,
            input_mode,
            points,
            samples_needed,
            min_samples,
        } => radiomap_cmd(g, &source, &input, input_mode, points.as_deref(), samples_needed, min_samples),
        Command::Report { input } => report_cmd(g, &input),
    }
}

fn report_options(m: &MetricArgs, default_interval: u32, group_by_rp: bool) -> Result<ReportOptions, Failure> {
    if m.windows.is_empty() || m.windows.iter().any(|w| w.is_nan() || *w <= 0.0) {
        return Err(Failure::Usage("--windows must be positive seconds".into()));
    }
    if m.bin_width_ms.is_nan() || m.bin_width_ms <= 0.0 {
        return Err(Failure::Usage("--bin-width-ms must be positive".into()));
    }
    let report_interval_tu = m.report_interval_tu.unwrap_or(default_interval);
    if report_interval_tu == 0 {
        return Err(Failure::Usage("--report-interval-tu must be positive".into()));
    }
    Ok(ReportOptions {
        windows_s: m.windows.clone(),
        bin_width_ms: m.bin_width_ms,
        report_interval_tu,
        window_offset_s: m.window_offset_s,
        group_by_rp,
    })
}

fn aggregate(runset: &RunSet, opts: &ReportOptions) -> Result<ScenarioReport, Failure> {
    aggregate_runs(runset, opts).map_err(|e| Failure::Input(format!("{}: {e}", runset.label)))
}

/// Splits an optional `RP=` tag off an input argument. An argument that
/// names an existing path is never split.
fn split_tag(arg: &str) -> (Option<String>, PathBuf) {
    if !Path::new(arg).exists() {
        if let Some((rp, path)) = arg.split_once('=') {
            if !rp.is_empty() {
                return (Some(rp.to_string()), PathBuf::from(path));
            }
        }
    }
    (None, PathBuf::from(arg))
}

fn is_capture_file(p: &Path) -> bool {
    p.is_file()
        && p.extension().is_some_and(|e| {
            let e = e.to_string_lossy().to_ascii_lowercase();
            matches!(e.as_str(), "pcap" | "cap" | "csv")
        })
}

/// Expands directories (one level, sorted) into capture files.
fn expand_inputs(args: &[String]) -> Vec<(Option<String>, PathBuf)> {
    let mut files = Vec::new();
    for arg in args {
        let (rp, path) = split_tag(arg);
        if path.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(&path)
                .map(|rd| rd.filter_map(|e| e.ok().map(|e| e.path())).collect())
                .unwrap_or_default();
            found.retain(|p| is_capture_file(p));
            found.sort();
            files.extend(found.into_iter().map(|p| (rp.clone(), p)));
        } else {
            files.push((rp, path));
        }
    }
    files
}

/// Reads every file, reporting and skipping the unreadable ones. Run
/// numbers count per reference point in input order.
fn read_sessions(
    args: &[String],
    opts: &ReadOptions,
) -> Result<Vec<(Option<String>, CaptureSession)>, Failure> {
    let files = expand_inputs(args);
    if files.is_empty() {
        return Err(Failure::Input("no input files".into()));
    }
    let mut runs_per_rp = BTreeMap::<Option<String>, u32>::new();
    let mut sessions = Vec::new();
    for (rp, path) in files {
        match read_input_file(&path, opts) {
            Ok(mut s) => {
                if s.meta.skipped > 0 {
                    eprintln!("note: {}: {} packets skipped", path.display(), s.meta.skipped);
                }
                if s.meta.empty_warning {
                    eprintln!("warning: {}: no beacons", path.display());
                }
                let run = runs_per_rp.entry(rp.clone()).or_default();
                s.meta.label.rp = rp.clone();
                s.meta.label.run = Some(*run);
                *run += 1;
                sessions.push((rp, s));
            }
            Err(e) => eprintln!("warning: skipping {}: {e}", path.display()),
        }
    }
    if sessions.is_empty() {
        return Err(Failure::Input("no readable input files".into()));
    }
    Ok(sessions)
}

fn duration_us(duration_s: Option<f64>) -> Result<Option<u64>, Failure> {
    match duration_s {
        None => Ok(None),
        Some(d) if d > 0.0 && d.is_finite() => Ok(Some((d * 1e6).round() as u64)),
        Some(_) => Err(Failure::Usage("--duration-s must be positive".into())),
    }
}

fn analyze(
    g: &GlobalArgs,
    input: &[String],
    read: &ReadOptions,
    label: String,
    group_by_rp: bool,
    metrics: &MetricArgs,
) -> Result<(), Failure> {
    let opts = report_options(metrics, DEFAULT_REPORT_INTERVAL_TU, group_by_rp)?;
    let sessions = read_sessions(input, read)?;
    let runset = RunSet {
        label,
        runs: sessions.into_iter().map(|(_, s)| s).collect(),
    };
    let rep = aggregate(&runset, &opts)?;
    let text = write_report(&g.out, &rep, g)?;
    print!("{text}");
    Ok(())
}

/// Scenarios named by `--scenario` or `--preset`, with flag overrides
/// applied and validated.
fn load_sources(src: &PresetArgs) -> Result<Vec<SimScenario>, Failure> {
    let mut scenarios = if !src.scenario.is_empty() {
        let mut v = Vec::new();
        for p in &src.scenario {
            let mut s = load_scenario(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            if let Some(m) = src.mode {
                s.mode = m;
            }
            v.push(s);
        }
        v
    } else if let Some(name) = &src.preset {
        let v = presets::lookup(name, src.mode, src.vendor.as_deref())
            .map_err(|e| Failure::Usage(e.to_string()))?;
        if v.is_empty() {
            return Err(Failure::Usage(format!("no `{name}` preset matches the given mode and vendor")));
        }
        v
    } else {
        return Err(Failure::Usage("give --scenario or --preset".into()));
    };
    for s in &mut scenarios {
        if let Some(seed) = src.seed {
            s.seed = seed;
        }
        if let Some(runs) = src.runs {
            s.runs = runs;
        }
        if let Some(d) = src.duration_s {
            s.duration_s = d;
        }
        s.validate()
            .map_err(|e| Failure::Input(format!("{}: {e}", s.label)))?;
    }
    Ok(scenarios)
}

fn run_file_name(s: &CaptureSession, ext: &str) -> String {
    let run = s.meta.label.run.unwrap_or(0);
    match &s.meta.label.rp {
        Some(rp) => format!("{rp}-run{run:02}.{ext}"),
        None => format!("run{run:02}.{ext}"),
    }
}

fn simulate_cmd(g: &GlobalArgs, src: &PresetArgs, emit: Emit, metrics: &MetricArgs) -> Result<(), Failure> {
    for scenario in load_sources(src)? {
        let runset = simulate(&scenario).map_err(|e| Failure::Input(format!("{}: {e}", scenario.label)))?;
        let dir = g.out.join(&scenario.label);
        create_dir(&dir)?;
        write_file(&dir.join("scenario.toml"), &scenario_to_toml(&scenario))?;
        let runs_dir = dir.join("runs");
        if emit != Emit::None {
            create_dir(&runs_dir)?;
        }
        for s in &runset.runs {
            let written = match emit {
                Emit::Pcap => write_capture_file(s, &runs_dir.join(run_file_name(s, "pcap"))),
                Emit::Csv => write_csv_file(s, &runs_dir.join(run_file_name(s, "csv"))),
                Emit::None => Ok(()),
            };
            written.map_err(|e| Failure::Input(e.to_string()))?;
        }
        let opts = report_options(metrics, scenario.report_interval_tu, !scenario.rps.is_empty())?;
        let rep = aggregate(&runset, &opts)?;
        let text = write_report(&dir, &rep, g)?;
        print!("{text}");
    }
    Ok(())
}

fn print_achieved(r: &CalibrationResult) {
    for a in &r.achieved {
        let ap = a.bssid.map(|b| format!(" {b}")).unwrap_or_default();
        let miss = a
            .target_miss_rate_pct
            .map(|t| format!(" miss {:.2}% (target {t:.2}%)", a.miss_rate_pct))
            .unwrap_or_default();
        println!(
            "  {}{ap}: rate {:.4} (target {:.4}, {:+.2}%){miss}",
            a.label,
            a.rate,
            a.target_rate,
            (a.rate - a.target_rate) / a.target_rate * 100.0
        );
    }
}

fn write_calibrated(dir: &Path, r: &CalibrationResult) -> Result<(), Failure> {
    create_dir(dir)?;
    for s in &r.scenarios {
        let path = dir.join(format!("{}.calibrated.toml", s.label));
        write_file(&path, &scenario_to_toml(s))?;
        println!("  wrote {}", path.display());
    }
    Ok(())
}

fn calibrate_cmd(
    g: &GlobalArgs,
    src: &PresetArgs,
    tolerance: f64,
    free: &[String],
    max_evaluations: usize,
) -> Result<(), Failure> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Failure::Usage("--tolerance must be positive".into()));
    }
    let mut opts = CalibrationOptions {
        tolerance,
        max_evaluations,
        ..CalibrationOptions::default()
    };
    if !free.is_empty() {
        opts.free = free
            .iter()
            .map(|f| f.parse::<FreeParam>().map_err(Failure::Usage))
            .collect::<Result<_, _>>()?;
    }
    let templates = load_sources(src)?;
    let mut failure: Option<Failure> = None;
    for (mode, result) in calibrate_by_mode(&templates, &opts) {
        match result {
            Ok(r) => {
                println!("{mode}: converged after {} evaluations", r.evaluations);
                print_achieved(&r);
                write_calibrated(&g.out, &r)?;
            }
            Err(CalibrationError::NotConverged(r)) => {
                println!(
                    "{mode}: not converged after {} evaluations, best max relative error {:.4}",
                    r.evaluations,
                    r.max_rel_error()
                );
                print_achieved(&r);
                write_calibrated(&g.out, &r)?;
                failure = Some(Failure::Calibration(format!("{mode} calibration did not converge")));
            }
            Err(e @ CalibrationError::Infeasible { .. }) => {
                println!("{mode}: {e}");
                if !matches!(failure, Some(Failure::Calibration(_))) {
                    failure = Some(Failure::Input(format!("{mode}: {e}")));
                }
            }
            Err(e) => return Err(Failure::Input(format!("{mode}: {e}"))),
        }
    }
    failure.map_or(Ok(()), Err)
}

/// Reference points from a TOML file of `[[rps]]` tables. A full scenario
/// file works too; its other keys are ignored.
#[derive(Deserialize)]
struct PointsFile {
    #[serde(default)]
    rps: Vec<RpSpec>,
}

fn to_reference_point(rp: &RpSpec) -> ReferencePoint {
    ReferencePoint {
        floor: rp.floor.clone(),
        ..ReferencePoint::new(rp.id.clone(), rp.x, rp.y)
    }
}

fn load_points(path: &Path) -> Result<BTreeMap<String, ReferencePoint>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let file: PointsFile =
        toml::from_str(&text).map_err(|e| Failure::Input(format!("{}: {}", path.display(), e.message())))?;
    Ok(file.rps.iter().map(|rp| (rp.id.clone(), to_reference_point(rp))).collect())
}

/// `rp_id,bssid,rate_pps,samples_needed,survey_s`; an AP never heard at a
/// point gets an empty survey time.
fn survey_csv(sessions: &[(ReferencePoint, CaptureSession)], samples_needed: u32) -> (String, String) {
    let mut counts = BTreeMap::<(String, beaconrate::MacAddr), u64>::new();
    let mut seconds = BTreeMap::<String, f64>::new();
    for (rp, s) in sessions {
        *seconds.entry(rp.id.clone()).or_default() += s.duration_s();
        for r in &s.records {
            *counts.entry((rp.id.clone(), r.ap.bssid)).or_default() += 1;
        }
    }
    let mut csv = String::from("rp_id,bssid,rate_pps,samples_needed,survey_s\n");
    let mut text = String::new();
    let mut worst = BTreeMap::<String, f64>::new();
    for ((rp, bssid), n) in &counts {
        let rate = *n as f64 / seconds[rp];
        let t = survey_time_estimate(rate, samples_needed).ok();
        let shown = t.map(|t| format!("{t:.1}")).unwrap_or_default();
        let _ = writeln!(csv, "{rp},{bssid},{rate:.4},{samples_needed},{shown}");
        if let Some(t) = t {
            let w = worst.entry(rp.clone()).or_default();
            *w = w.max(t);
        }
    }
    for (rp, t) in &worst {
        let _ = writeln!(text, "  {rp}: {t:.1} s for {samples_needed} samples of every AP");
    }
    (csv, text)
}

fn write_map(
    dir: &Path,
    sessions: &[(ReferencePoint, CaptureSession)],
    samples_needed: u32,
    min_samples: u64,
) -> Result<(), Failure> {
    if samples_needed == 0 {
        return Err(Failure::Usage("--samples-needed must be at least 1".into()));
    }
    create_dir(dir)?;
    let map = build_radiomap(sessions, min_samples);
    let map_path = dir.join("radiomap.csv");
    export_radiomap(&map, &map_path).map_err(|e| Failure::Input(e.to_string()))?;
    let (csv, text) = survey_csv(sessions, samples_needed);
    write_file(&dir.join("survey.csv"), &csv)?;
    let low = map.entries.values().filter(|e| e.low_sample).count();
    println!(
        "{}: {} points, {} entries ({low} below {min_samples} samples)",
        map_path.display(),
        map.points.len(),
        map.len()
    );
    print!("{text}");
    Ok(())
}

fn radiomap_cmd(
    g: &GlobalArgs,
    src: &PresetArgs,
    input: &[String],
    input_mode: Option<CaptureMode>,
    points: Option<&Path>,
    samples_needed: u32,
    min_samples: u64,
) -> Result<(), Failure> {
    let mut known = match points {
        Some(p) => load_points(p)?,
        None => BTreeMap::new(),
    };
    if !input.is_empty() {
        let mode = input_mode.ok_or_else(|| Failure::Usage("--input needs --input-mode".into()))?;
        let read = ReadOptions {
            mode,
            ..ReadOptions::default()
        };
        let sessions: Vec<_> = read_sessions(input, &read)?
            .into_iter()
            .map(|(rp, s)| {
                let id = rp.unwrap_or_else(|| {
                    s.meta
                        .label
                        .path
                        .as_deref()
                        .and_then(|p| Path::new(p).file_stem())
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default()
                });
                let point = known
                    .entry(id.clone())
                    .or_insert_with(|| ReferencePoint::new(id, 0.0, 0.0))
                    .clone();
                (point, s)
            })
            .collect();
        return write_map(&g.out, &sessions, samples_needed, min_samples);
    }
    for scenario in load_sources(src)? {
        let runset = simulate(&scenario).map_err(|e| Failure::Input(format!("{}: {e}", scenario.label)))?;
        let default_rp = ReferencePoint::new("RP1", 0.0, 0.0);
        let sessions: Vec<_> = runset
            .runs
            .into_iter()
            .map(|s| {
                let point = match &s.meta.label.rp {
                    Some(id) => known.get(id).cloned().unwrap_or_else(|| {
                        let rp = scenario.rps.iter().find(|r| &r.id == id).expect("session rp is in scenario");
                        to_reference_point(rp)
                    }),
                    None => default_rp.clone(),
                };
                (point, s)
            })
            .collect();
        println!("{}:", scenario.label);
        write_map(&g.out.join(&scenario.label), &sessions, samples_needed, min_samples)?;
    }
    Ok(())
}

fn report_cmd(g: &GlobalArgs, input: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", input.display())))?;
    let rep = report::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
    let text = write_report(&g.out, &rep, g)?;
    print!("{text}");
    Ok(())
}
