//! `beaconrate`: batch analysis of beacon captures, capture-mode
//! simulation, calibration and radio-map building.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use beaconrate::CaptureMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Default output directory when neither `--out` nor the env var is set.
pub const DEFAULT_OUT_DIR: &str = "beaconrate-out";

#[derive(Debug, Parser)]
#[command(name = "beaconrate", version, about = "Beacon capture-rate analysis and simulation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Output directory.
    #[arg(long, global = true, env = "BEACONRATE_OUT", default_value = DEFAULT_OUT_DIR)]
    pub out: PathBuf,
    /// Report formats to write; all three when omitted.
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    pub format: Vec<Format>,
    /// Leave out the `# generated` line of text reports.
    #[arg(long, global = true)]
    pub no_header_timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Pcap,
    Csv,
    None,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Probability-of-capture windows in seconds.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub windows: Vec<f64>,
    /// Arrival-delay histogram bin width.
    #[arg(long, default_value_t = 25.0)]
    pub bin_width_ms: f64,
    /// Normal-mode report interval, for the theoretical rate. Defaults to
    /// the scenario's value, or 1000 TU for captured files.
    #[arg(long)]
    pub report_interval_tu: Option<u32>,
    /// Shifts the window grid away from the session start.
    #[arg(long, default_value_t = 0.0)]
    pub window_offset_s: f64,
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub scenario: Vec<PathBuf>,
    /// Built-in scenario family or full preset name.
    #[arg(long)]
    pub preset: Option<String>,
    /// Restricts presets to one mode; overrides the mode of a scenario file.
    #[arg(long)]
    pub mode: Option<CaptureMode>,
    /// Restricts vendor-specific presets.
    #[arg(long)]
    pub vendor: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<u32>,
    #[arg(long)]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure rates, miss-rates, delays and gaps in captured files.
    Analyze {
        /// Capture files or directories (pcap or CSV). Prefix with `RP=` to
        /// tag a reference point.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<String>,
        /// Capture mode the files were recorded in.
        #[arg(long)]
        mode: CaptureMode,
        #[arg(long, default_value = "analysis")]
        label: String,
        /// Session length; by default each file's span rounded up to a second.
        #[arg(long)]
        duration_s: Option<f64>,
        /// Absolute capture time (us) taken as t = 0; defaults to the first
        /// packet of each file.
        #[arg(long)]
        origin_us: Option<u64>,
        /// Use the radiotap TSFT instead of the pcap packet time.
        #[arg(long)]
        tsft: bool,
        /// Average per reference point before averaging across them.
        #[arg(long)]
        group_by_rp: bool,
        #[command(flatten)]
        metrics: MetricArgs,
    },
    /// Simulate a scenario and report on the synthetic captures.
    Simulate {
        #[command(flatten)]
        source: PresetArgs,
        /// Per-run capture files to write.
        #[arg(long, value_enum, default_value = "pcap")]
        emit: Emit,
        #[command(flatten)]
        metrics: MetricArgs,
    },
    /// Fit loss-model parameters so simulated rates meet scenario targets.
    Calibrate {
        #[command(flatten)]
        source: PresetArgs,
        /// Largest accepted relative rate error.
        #[arg(long, default_value_t = 0.02)]
        tolerance: f64,
        /// Parameters to fit, by field name.
        #[arg(long, value_delimiter = ',')]
        free: Vec<String>,
        #[arg(long, default_value_t = 400)]
        max_evaluations: usize,
    },
    /// Build a radio map and survey-time estimates.
    Radiomap {
        #[command(flatten)]
        source: PresetArgs,
        /// Capture files tagged `RP=path` instead of a simulated scenario.
        #[arg(long, conflicts_with_all = ["preset", "scenario"])]
        input: Vec<String>,
        /// Mode of the `--input` files.
        #[arg(long, requires = "input")]
        input_mode: Option<CaptureMode>,
        /// TOML file with `[[rps]]` tables giving RP coordinates.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, default_value_t = beaconrate::radiomap::DEFAULT_SAMPLES_NEEDED)]
        samples_needed: u32,
        #[arg(long, default_value_t = beaconrate::radiomap::DEFAULT_MIN_SAMPLES)]
        min_samples: u64,
    },
    /// Re-render a stored JSON report.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

/// A fatal error and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Input(String),
    Calibration(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Calibration(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Calibration(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
