//! Rule-set-driven parsing of external synthesis reports.
//!
//! Report formats vary by tool and version and cannot be bundled, so
//! extraction is driven by named regexes supplied per rule set. Units
//! are normalized to the pipeline's fixed ones (µW, µm², ps).

use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::PpaReport;

/// Named regexes for one report format. `power_line`, `area_line`, and
/// `slack_line` must each capture a `value` group; the power unit comes
/// from the capture group named by `power_unit_group` when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRulesConfig {
    #[serde(default = "default_power_line")]
    pub power_line: String,
    #[serde(default = "default_power_unit_group")]
    pub power_unit_group: String,
    #[serde(default = "default_area_line")]
    pub area_line: String,
    #[serde(default = "default_slack_line")]
    pub slack_line: String,
    #[serde(default = "default_warning_line")]
    pub warning_line: String,
    /// Unit of the captured slack value: "ns" or "ps".
    #[serde(default = "default_slack_unit")]
    pub slack_unit: String,
}

fn default_power_line() -> String {
    r"(?i)total\s+dynamic\s+power\s*=\s*(?P<value>[0-9.eE+-]+)\s*(?P<unit>[munp]?W)".to_string()
}
fn default_power_unit_group() -> String {
    "unit".to_string()
}
fn default_area_line() -> String {
    r"(?i)total\s+cell\s+area\s*[:=]?\s*(?P<value>[0-9.eE+-]+)".to_string()
}
fn default_slack_line() -> String {
    r"(?i)slack\s*\((?:MET|VIOLATED)\)\s*[:=]?\s*(?P<value>[0-9.eE+-]+)".to_string()
}
fn default_warning_line() -> String {
    r"(?i)^\s*warning".to_string()
}
fn default_slack_unit() -> String {
    "ns".to_string()
}

impl Default for ReportRulesConfig {
    fn default() -> Self {
        Self {
            power_line: default_power_line(),
            power_unit_group: default_power_unit_group(),
            area_line: default_area_line(),
            slack_line: default_slack_line(),
            warning_line: default_warning_line(),
            slack_unit: default_slack_unit(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportParseError {
    #[error("report directory {dir}: missing fields: {}", missing.join(", "))]
    MissingFields { dir: String, missing: Vec<String> },
    #[error("report rules: {0}")]
    BadRules(String),
    #[error("report directory {dir}: {message}")]
    Io { dir: String, message: String },
}

struct CompiledRules {
    power_line: Regex,
    power_unit_group: String,
    area_line: Regex,
    slack_line: Regex,
    warning_line: Regex,
    slack_to_ps: f64,
}

impl ReportRulesConfig {
    fn compile(&self) -> Result<CompiledRules, ReportParseError> {
        let compile = |pattern: &str| {
            Regex::new(pattern).map_err(|e| ReportParseError::BadRules(e.to_string()))
        };
        let slack_to_ps = match self.slack_unit.as_str() {
            "ns" => 1000.0,
            "ps" => 1.0,
            other => {
                return Err(ReportParseError::BadRules(format!(
                    "slack_unit must be ns or ps, got {other:?}"
                )))
            }
        };
        Ok(CompiledRules {
            power_line: compile(&self.power_line)?,
            power_unit_group: self.power_unit_group.clone(),
            area_line: compile(&self.area_line)?,
            slack_line: compile(&self.slack_line)?,
            warning_line: compile(&self.warning_line)?,
            slack_to_ps,
        })
    }
}

fn power_unit_to_uw(unit: &str) -> f64 {
    match unit.to_ascii_lowercase().as_str() {
        "w" => 1e6,
        "mw" => 1e3,
        "uw" => 1.0,
        "nw" => 1e-3,
        "pw" => 1e-6,
        _ => 1.0,
    }
}

/// Extracts power, area, and worst slack from every regular file in
/// `report_dir` (sorted by name, first match per field wins), plus all
/// warning lines. The clock field stays unset; the synthesis driver
/// stamps the requested period.
pub fn parse_reports(
    report_dir: &Path,
    rules: &ReportRulesConfig,
) -> Result<PpaReport, ReportParseError> {
    let compiled = rules.compile()?;
    let mut paths: Vec<_> = std::fs::read_dir(report_dir)
        .map_err(|e| ReportParseError::Io {
            dir: report_dir.display().to_string(),
            message: e.to_string(),
        })?
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();

    let mut power_uw = None;
    let mut area_um2 = None;
    let mut slack_ps = None;
    let mut warnings = Vec::new();

    for path in &paths {
        let Ok(bytes) = std::fs::read(path) else {
            continue;
        };
        let text = String::from_utf8_lossy(&bytes);
        for line in text.lines() {
            if power_uw.is_none() {
                if let Some(caps) = compiled.power_line.captures(line) {
                    if let Some(value) = caps
                        .name("value")
                        .and_then(|v| v.as_str().parse::<f64>().ok())
                    {
                        let unit = caps
                            .name(&compiled.power_unit_group)
                            .map(|u| power_unit_to_uw(u.as_str()))
                            .unwrap_or(1.0);
                        power_uw = Some(value * unit);
                    }
                }
            }
            if area_um2.is_none() {
                if let Some(caps) = compiled.area_line.captures(line) {
                    if let Some(value) = caps
                        .name("value")
                        .and_then(|v| v.as_str().parse::<f64>().ok())
                    {
                        area_um2 = Some(value);
                    }
                }
            }
            if slack_ps.is_none() {
                if let Some(caps) = compiled.slack_line.captures(line) {
                    if let Some(value) = caps
                        .name("value")
                        .and_then(|v| v.as_str().parse::<f64>().ok())
                    {
                        let sign = if line.to_ascii_lowercase().contains("violated") && value > 0.0
                        {
                            -1.0
                        } else {
                            1.0
                        };
                        slack_ps = Some(sign * value * compiled.slack_to_ps);
                    }
                }
            }
            if compiled.warning_line.is_match(line) {
                warnings.push(line.trim().to_string());
            }
        }
    }

    let mut missing = Vec::new();
    if power_uw.is_none() {
        missing.push("power".to_string());
    }
    if area_um2.is_none() {
        missing.push("area".to_string());
    }
    if slack_ps.is_none() {
        missing.push("slack".to_string());
    }
    if !missing.is_empty() {
        return Err(ReportParseError::MissingFields {
            dir: report_dir.display().to_string(),
            missing,
        });
    }

    Ok(PpaReport {
        synthesizable: true,
        clock_ps: None,
        power_uw,
        area_um2,
        slack_ps,
        tool_warnings: warnings,
    })
}
