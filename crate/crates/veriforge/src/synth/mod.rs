//! The PPA stage: synthesis backends, report parsing, timing-constraint
//! emission, the clock sweep, the constraint gate, and the optimization
//! loop that re-prompts the model when the gate fails.

mod mock;
mod optimize;
mod report;
mod sdc;
mod sweep;

pub use mock::{synthesize as mock_synthesize, top_module_name, MockDesignRow, MockModelParams};
pub use optimize::{optimize_ppa, PpaHalt, PpaOutcome, PpaStageConfig, StageError};
pub use report::{parse_reports, ReportParseError, ReportRulesConfig};
pub use sdc::emit_sdc;
pub use sweep::{sweep_min_clock, SweepConfig, SweepError, SweepResult};

use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PortDecl, PpaConstraints, PpaReport, VerilogSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthBackendKind {
    External,
    Mock,
}

/// Synthesis backend selection: an external command template (the real
/// flow, reached only through configuration) or the built-in mock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthBackendConfig {
    pub kind: SynthBackendKind,
    /// External command with `{design_file}`, `{sdc_file}`, and
    /// `{report_dir}` placeholders, split on whitespace before
    /// substitution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command_template: Option<String>,
    #[serde(default)]
    pub report_rules: ReportRulesConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_params: Option<MockModelParams>,
}

impl SynthBackendConfig {
    pub fn mock(params: MockModelParams) -> Self {
        Self {
            kind: SynthBackendKind::Mock,
            command_template: None,
            report_rules: ReportRulesConfig::default(),
            mock_params: Some(params),
        }
    }

    pub fn external(command_template: impl Into<String>, report_rules: ReportRulesConfig) -> Self {
        Self {
            kind: SynthBackendKind::External,
            command_template: Some(command_template.into()),
            report_rules,
            mock_params: None,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let ok = match self.kind {
            SynthBackendKind::External => {
                self.command_template.is_some() && self.mock_params.is_none()
            }
            SynthBackendKind::Mock => self.mock_params.is_some() && self.command_template.is_none(),
        };
        if ok {
            Ok(())
        } else {
            Err(SynthError::InvalidConfig(
                "exactly one of command_template (external) or mock_params (mock) must be set"
                    .into(),
            ))
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("synthesis backend config: {0}")]
    InvalidConfig(String),
    #[error("synthesis tool not found: {program}")]
    ToolMissing { program: String },
    #[error("synthesis workdir: {context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    ReportParse(#[from] ReportParseError),
    #[error("report for an unsynthesizable design cannot be gated")]
    Unsynthesizable,
}

/// Synthesizes one design at one clock constraint and returns its
/// measured report.
///
/// External backends get the design and an SDC file written into
/// `workdir`, run the command template, and have their reports parsed
/// from `<workdir>/reports`; a nonzero exit becomes an unsynthesizable
/// report carrying the stderr tail. The mock backend computes the
/// report arithmetically.
pub fn synthesize(
    source: &VerilogSource,
    clock_ps: f64,
    backend: &SynthBackendConfig,
    workdir: &Path,
    ports: &[PortDecl],
) -> Result<PpaReport, SynthError> {
    backend.validate()?;
    match backend.kind {
        SynthBackendKind::Mock => Ok(mock::synthesize(
            &source.text,
            clock_ps,
            backend.mock_params.as_ref().unwrap(),
        )),
        SynthBackendKind::External => {
            external_synthesize(source, clock_ps, backend, workdir, ports)
        }
    }
}

fn external_synthesize(
    source: &VerilogSource,
    clock_ps: f64,
    backend: &SynthBackendConfig,
    workdir: &Path,
    ports: &[PortDecl],
) -> Result<PpaReport, SynthError> {
    let io_err = |context: &str, e: std::io::Error| SynthError::Io {
        context: context.to_string(),
        source: e,
    };
    std::fs::create_dir_all(workdir).map_err(|e| io_err("create workdir", e))?;
    let design_file = workdir.join("design.v");
    let sdc_file = workdir.join("design.sdc");
    let report_dir = workdir.join("reports");
    std::fs::write(&design_file, &source.text).map_err(|e| io_err("write design", e))?;
    std::fs::write(&sdc_file, emit_sdc(clock_ps, ports)).map_err(|e| io_err("write sdc", e))?;
    std::fs::create_dir_all(&report_dir).map_err(|e| io_err("create report dir", e))?;

    let argv: Vec<String> = backend
        .command_template
        .as_ref()
        .unwrap()
        .split_whitespace()
        .map(|token| {
            token
                .replace("{design_file}", &design_file.display().to_string())
                .replace("{sdc_file}", &sdc_file.display().to_string())
                .replace("{report_dir}", &report_dir.display().to_string())
        })
        .collect();
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| SynthError::InvalidConfig("empty command template".into()))?;

    let output = Command::new(program)
        .args(args)
        .current_dir(workdir)
        .output()
        .map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                SynthError::ToolMissing {
                    program: program.clone(),
                }
            } else {
                io_err(&format!("spawn {program}"), e)
            }
        })?;

    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let tail: Vec<String> = stderr.lines().rev().take(10).map(String::from).collect();
        return Ok(PpaReport::unsynthesizable(tail.into_iter().rev().collect()));
    }

    let mut report = parse_reports(&report_dir, &backend.report_rules)?;
    report.clock_ps = Some(clock_ps);
    Ok(report)
}

/// One violated bound: the metric, what was measured, what was
/// required. Displays as `clock 500.0 > 300.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub metric: String,
    pub measured: f64,
    pub required: f64,
}

impl std::fmt::Display for BoundViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:?} > {:?}",
            self.metric, self.measured, self.required
        )
    }
}

/// Outcome of the constraint gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "gate", content = "violations")]
pub enum GateOutcome {
    Pass,
    Fail(Vec<BoundViolation>),
}

impl GateOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, GateOutcome::Pass)
    }
}

/// Applies the quality gate: pass iff every present bound holds. Empty
/// constraints pass vacuously. Requires a synthesizable report.
pub fn ppa_gate(
    report: &PpaReport,
    constraints: &PpaConstraints,
) -> Result<GateOutcome, SynthError> {
    if !report.synthesizable {
        return Err(SynthError::Unsynthesizable);
    }
    let mut violations = Vec::new();
    let checks = [
        ("clock", report.clock_ps, constraints.max_clock_ps),
        ("power", report.power_uw, constraints.max_power_uw),
        ("area", report.area_um2, constraints.max_area_um2),
    ];
    for (metric, measured, bound) in checks {
        if let Some(required) = bound {
            let measured = measured.unwrap_or(f64::NAN);
            // NaN (unmeasured) is incomparable and must count as a
            // violation, so "within bound" is checked positively.
            let within = matches!(
                measured.partial_cmp(&required),
                Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)
            );
            if !within {
                violations.push(BoundViolation {
                    metric: metric.to_string(),
                    measured,
                    required,
                });
            }
        }
    }
    if violations.is_empty() {
        Ok(GateOutcome::Pass)
    } else {
        Ok(GateOutcome::Fail(violations))
    }
}

/// Restriction of `constraints` to the bounds `report` violates;
/// present fields mark the violated metrics (the shape
/// `select_icl_examples` consumes).
pub fn violated_bounds(report: &PpaReport, constraints: &PpaConstraints) -> PpaConstraints {
    let violated = |measured: Option<f64>, bound: Option<f64>| match (measured, bound) {
        (Some(m), Some(b)) if m > b => Some(b),
        (None, Some(b)) => Some(b),
        _ => None,
    };
    PpaConstraints {
        max_clock_ps: violated(report.clock_ps, constraints.max_clock_ps),
        max_power_uw: violated(report.power_uw, constraints.max_power_uw),
        max_area_um2: violated(report.area_um2, constraints.max_area_um2),
    }
}
