//! Scenario files in TOML.

use std::path::Path;

use super::{ScenarioError, SimScenario};

/// Parses and validates a scenario. Unknown keys are rejected.
pub fn parse_scenario(text: &str) -> Result<SimScenario, ScenarioError> {
    let scenario: SimScenario = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        match e.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].lines().count().max(1);
                ScenarioError::Parse(format!("line {line}: {msg}"))
            }
            None => ScenarioError::Parse(msg),
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<SimScenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut s = parse_scenario(&text)?;
    if s.label.is_empty() {
        s.label = path
            .file_stem()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(s)
}

pub fn scenario_to_toml(scenario: &SimScenario) -> String {
    toml::to_string(scenario).expect("scenario serializes")
}
