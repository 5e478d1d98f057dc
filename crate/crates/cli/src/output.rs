//! Report files on disk.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use beaconrate::metrics::{report, ScenarioReport};

use crate::{Failure, Format, GlobalArgs};

pub fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Input(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn wants(global: &GlobalArgs, f: Format) -> bool {
    global.format.is_empty() || global.format.contains(&f)
}

/// Value of the text report's first line, or `None` when disabled.
pub fn generated_stamp(global: &GlobalArgs) -> Option<String> {
    if global.no_header_timestamp {
        return None;
    }
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    Some(format!("unix {secs}"))
}

/// Writes the requested report forms into `dir` and returns the text form.
///
/// csv: `report.csv`, `histogram.csv`, `gaps.csv`; json: `report.json`;
/// text: `report.txt`.
pub fn write_report(dir: &Path, rep: &ScenarioReport, global: &GlobalArgs) -> Result<String, Failure> {
    create_dir(dir)?;
    let stamp = generated_stamp(global);
    let text = report::to_text(rep, stamp.as_deref());
    if wants(global, Format::Csv) {
        write_file(&dir.join("report.csv"), &report::to_csv(rep))?;
        write_file(&dir.join("histogram.csv"), &report::histogram_csv(rep))?;
        write_file(&dir.join("gaps.csv"), &report::gaps_csv(rep))?;
    }
    if wants(global, Format::Json) {
        write_file(&dir.join("report.json"), &report::to_json(rep))?;
    }
    if wants(global, Format::Text) {
        write_file(&dir.join("report.txt"), &text)?;
    }
    Ok(text)
}
