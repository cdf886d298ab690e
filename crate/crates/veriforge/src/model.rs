//! Shared data vocabulary of the pipeline.
//!
//! Every other module speaks in these types: design specs, candidate
//! Verilog sources, simulator diagnostics, PPA reports and constraints,
//! and the per-attempt audit record. All values are immutable after
//! construction and safe to share across worker threads.

use std::path::{Path, PathBuf};

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

/// Port direction of a Verilog module port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortDirection {
    Input,
    Output,
    Inout,
}

/// One declared port of the target module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortDecl {
    pub name: String,
    pub direction: PortDirection,
    pub width_bits: u32,
}

impl PortDecl {
    pub fn new(name: impl Into<String>, direction: PortDirection, width_bits: u32) -> Self {
        Self {
            name: name.into(),
            direction,
            width_bits,
        }
    }
}

/// A natural-language hardware design task: the prompt body, the module
/// interface it must implement, and the testbench that judges it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub design_id: String,
    pub description: String,
    pub module_name: String,
    #[serde(default)]
    pub ports: Vec<PortDecl>,
    pub testbench_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppa_constraints: Option<PpaConstraints>,
}

static VERILOG_IDENT: Lazy<Regex> = Lazy::new(|| Regex::new(r"^[A-Za-z_][A-Za-z0-9_$]*$").unwrap());

/// Checks every [`DesignSpec`] invariant, returning one message per
/// violation. An empty list means the spec is well formed. Violations
/// are data, not errors: loaders decide whether to skip or abort.
pub fn validate_design_spec(spec: &DesignSpec) -> Vec<String> {
    let mut violations = Vec::new();
    if spec.design_id.is_empty() {
        violations.push("design_id must be non-empty".to_string());
    }
    if !VERILOG_IDENT.is_match(&spec.module_name) {
        violations.push(format!(
            "module_name is not a legal Verilog identifier: {:?}",
            spec.module_name
        ));
    }
    if !spec.testbench_path.is_file() {
        violations.push(format!(
            "testbench_path does not exist: {}",
            spec.testbench_path.display()
        ));
    }
    let mut seen = std::collections::HashSet::new();
    for (i, port) in spec.ports.iter().enumerate() {
        if port.width_bits < 1 {
            violations.push(format!("ports[{i}].width_bits must be ≥ 1"));
        }
        if !seen.insert(port.name.as_str()) {
            violations.push(format!("ports[{i}].name duplicates {:?}", port.name));
        }
    }
    if let Some(constraints) = &spec.ppa_constraints {
        violations.extend(constraints.validate());
    }
    violations
}

/// A candidate Verilog design with its provenance inside a repair run.
///
/// The text is opaque: no AST modeling, just the complete module source
/// plus the round index and attempt it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerilogSource {
    pub text: String,
    pub round: u32,
    pub attempt_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl VerilogSource {
    pub fn initial(text: impl Into<String>, attempt_id: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            round: 0,
            attempt_id: attempt_id.into(),
            parent: None,
        }
    }

    /// The successor source produced by one repair round.
    pub fn child(&self, text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            round: self.round + 1,
            attempt_id: self.attempt_id.clone(),
            parent: Some(format!("{}/round_{}", self.attempt_id, self.round)),
        }
    }
}

/// Classification of a single tool-output line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Syntax,
    Elaboration,
    Functional,
    Tool,
}

/// One structured error extracted from compiler or simulation output.
///
/// `raw` is byte-identical to the tool line it was parsed from, so the
/// repair prompt can quote the tool verbatim. Synthetic diagnostics
/// (timeouts, missing pass marker) carry an empty `raw`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    pub message: String,
    pub raw: String,
}

/// Overall verdict of one check, ordered least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Clean,
    FunctionalFail,
    SyntaxFail,
    ToolFail,
}

impl Verdict {
    pub fn is_clean(self) -> bool {
        self == Verdict::Clean
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Clean => "clean",
            Verdict::FunctionalFail => "functional_fail",
            Verdict::SyntaxFail => "syntax_fail",
            Verdict::ToolFail => "tool_fail",
        };
        f.write_str(s)
    }
}

/// The full error set of one check, with the verdict derived from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticSet {
    pub diagnostics: Vec<Diagnostic>,
    pub verdict: Verdict,
}

impl DiagnosticSet {
    /// Builds a set whose verdict is computed from the diagnostics, the
    /// only way a verdict should ever be produced.
    pub fn from_diagnostics(diagnostics: Vec<Diagnostic>) -> Self {
        let verdict = Self::verdict_of(&diagnostics);
        Self {
            diagnostics,
            verdict,
        }
    }

    pub fn clean() -> Self {
        Self::from_diagnostics(Vec::new())
    }

    /// Verdict as a pure function of the diagnostics list. Severity:
    /// tool > syntax (elaboration counts as syntax) > functional.
    pub fn verdict_of(diagnostics: &[Diagnostic]) -> Verdict {
        let mut verdict = Verdict::Clean;
        for d in diagnostics {
            let v = match d.kind {
                DiagnosticKind::Tool => Verdict::ToolFail,
                DiagnosticKind::Syntax | DiagnosticKind::Elaboration => Verdict::SyntaxFail,
                DiagnosticKind::Functional => Verdict::FunctionalFail,
            };
            verdict = verdict.max(v);
        }
        verdict
    }

    pub fn is_clean(&self) -> bool {
        self.verdict.is_clean()
    }

    /// True when the stored verdict matches the recomputed one.
    pub fn is_consistent(&self) -> bool {
        self.verdict == Self::verdict_of(&self.diagnostics)
    }
}

/// Measured synthesis quality of one design at one clock constraint.
///
/// When `synthesizable` is false the metric fields are absent and must
/// be ignored. Units are fixed: clock in picoseconds, power in
/// microwatts, area in square micrometers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpaReport {
    pub synthesizable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_ps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_uw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_um2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack_ps: Option<f64>,
    #[serde(default)]
    pub tool_warnings: Vec<String>,
}

impl PpaReport {
    pub fn measured(clock_ps: f64, power_uw: f64, area_um2: f64, slack_ps: f64) -> Self {
        Self {
            synthesizable: true,
            clock_ps: Some(clock_ps),
            power_uw: Some(power_uw),
            area_um2: Some(area_um2),
            slack_ps: Some(slack_ps),
            tool_warnings: Vec::new(),
        }
    }

    pub fn unsynthesizable(tool_warnings: Vec<String>) -> Self {
        Self {
            synthesizable: false,
            clock_ps: None,
            power_uw: None,
            area_um2: None,
            slack_ps: None,
            tool_warnings,
        }
    }

    /// Timing is met at the constrained period iff worst slack is
    /// non-negative.
    pub fn timing_met(&self) -> bool {
        self.slack_ps.map(|s| s >= 0.0).unwrap_or(false)
    }
}

/// Per-design quality bounds. All bounds are optional so the
/// correctness-only mode is expressible as an empty set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PpaConstraints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_clock_ps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_power_uw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_area_um2: Option<f64>,
}

impl PpaConstraints {
    pub fn is_empty(&self) -> bool {
        self.max_clock_ps.is_none() && self.max_power_uw.is_none() && self.max_area_um2.is_none()
    }

    fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (field, bound) in [
            ("max_clock_ps", self.max_clock_ps),
            ("max_power_uw", self.max_power_uw),
            ("max_area_um2", self.max_area_um2),
        ] {
            if let Some(b) = bound {
                if !(b.is_finite() && b > 0.0) {
                    v.push(format!(
                        "ppa_constraints.{field} must be finite and positive"
                    ));
                }
            }
        }
        v
    }
}

/// Knobs of the repair loop: the round limit K, the outer attempt count,
/// and the sampling parameters forwarded to the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectifyConfig {
    #[serde(default = "default_max_rounds_k")]
    pub max_rounds_k: u32,
    #[serde(default = "default_generations_n")]
    pub generations_n: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_context_length")]
    pub context_length: u32,
}

fn default_max_rounds_k() -> u32 {
    4
}
fn default_generations_n() -> u32 {
    5
}
fn default_temperature() -> f64 {
    0.7
}
fn default_context_length() -> u32 {
    2048
}

impl Default for RectifyConfig {
    fn default() -> Self {
        Self {
            max_rounds_k: default_max_rounds_k(),
            generations_n: default_generations_n(),
            temperature: default_temperature(),
            context_length: default_context_length(),
        }
    }
}

/// Token accounting for one backend call or one whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

impl TokenUsage {
    pub fn new(prompt_tokens: u64, completion_tokens: u64) -> Self {
        Self {
            prompt_tokens,
            completion_tokens,
            total_tokens: prompt_tokens + completion_tokens,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.total_tokens == self.prompt_tokens + self.completion_tokens
    }
}

impl std::ops::Add for TokenUsage {
    type Output = TokenUsage;
    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
            total_tokens: self.total_tokens + rhs.total_tokens,
        }
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: TokenUsage) {
        *self = *self + rhs;
    }
}

/// Role of one chat turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One turn of a conversation with a text-generation backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Highest milestone an attempt reached, ordered so that later
/// milestones imply all earlier ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Milestone {
    Fail,
    SyntaxPass,
    FunctionalPass,
    PpaPass,
}

impl Milestone {
    /// Milestone implied by a final correctness verdict, before any PPA
    /// stage runs. A functionally failing design still compiled, so it
    /// clears the syntax milestone.
    pub fn from_verdict(verdict: Verdict) -> Self {
        match verdict {
            Verdict::Clean => Milestone::FunctionalPass,
            Verdict::FunctionalFail => Milestone::SyntaxPass,
            Verdict::SyntaxFail | Verdict::ToolFail => Milestone::Fail,
        }
    }
}

impl std::fmt::Display for Milestone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Milestone::Fail => "fail",
            Milestone::SyntaxPass => "syntax_pass",
            Milestone::FunctionalPass => "functional_pass",
            Milestone::PpaPass => "ppa_pass",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Milestone {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fail" => Ok(Milestone::Fail),
            "syntax" | "syntax_pass" => Ok(Milestone::SyntaxPass),
            "functional" | "functional_pass" => Ok(Milestone::FunctionalPass),
            "ppa" | "ppa_pass" => Ok(Milestone::PpaPass),
            other => Err(format!("unknown milestone {other:?}")),
        }
    }
}

/// How one repair attempt ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    Clean,
    RoundLimit,
    ExtractionFailure,
    BackendFailure,
}

/// Full audit of one attempt: every round's verdict, the whole
/// conversation, token totals, and any synthesis reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub attempt_id: String,
    pub design_id: String,
    pub rounds: Vec<DiagnosticSet>,
    pub final_verdict: Milestone,
    pub halted_by: HaltReason,
    pub transcripts: Vec<ChatMessage>,
    pub token_usage: TokenUsage,
    #[serde(default)]
    pub reports: Vec<PpaReport>,
}

impl RunRecord {
    /// Checks the record's internal invariants; returns one message per
    /// violation. `max_rounds_k` comes from the run's config snapshot.
    pub fn validate(&self, max_rounds_k: u32) -> Vec<String> {
        let mut v = Vec::new();
        if self.rounds.len() as u32 > max_rounds_k + 1 {
            v.push(format!(
                "{}: {} rounds recorded, limit is K+1 = {}",
                self.attempt_id,
                self.rounds.len(),
                max_rounds_k + 1
            ));
        }
        if !self.token_usage.is_consistent() {
            v.push(format!(
                "{}: token_usage total {} != prompt {} + completion {}",
                self.attempt_id,
                self.token_usage.total_tokens,
                self.token_usage.prompt_tokens,
                self.token_usage.completion_tokens
            ));
        }
        for (i, set) in self.rounds.iter().enumerate() {
            if !set.is_consistent() {
                v.push(format!(
                    "{}: rounds[{i}] verdict {} inconsistent with its diagnostics",
                    self.attempt_id, set.verdict
                ));
            }
        }
        // Milestones are monotone: the claimed milestone must be backed
        // by the recorded rounds and reports.
        let last_verdict = self.rounds.last().map(|s| s.verdict);
        match self.final_verdict {
            Milestone::PpaPass | Milestone::FunctionalPass => {
                if last_verdict != Some(Verdict::Clean) {
                    v.push(format!(
                        "{}: final_verdict {} but last round is {:?}",
                        self.attempt_id, self.final_verdict, last_verdict
                    ));
                }
                if self.final_verdict == Milestone::PpaPass && self.reports.is_empty() {
                    v.push(format!(
                        "{}: final_verdict ppa_pass with no PPA reports",
                        self.attempt_id
                    ));
                }
            }
            Milestone::SyntaxPass => {
                if !matches!(
                    last_verdict,
                    Some(Verdict::Clean) | Some(Verdict::FunctionalFail)
                ) {
                    v.push(format!(
                        "{}: final_verdict syntax_pass but last round is {:?}",
                        self.attempt_id, last_verdict
                    ));
                }
            }
            Milestone::Fail => {}
        }
        v
    }
}

/// Writes `path` atomically: serialize to a sibling temp file, then
/// rename over the target.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(parent)?;
    let tmp = parent.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy())
            .unwrap_or_default()
    ));
    let json = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    std::fs::write(&tmp, json.as_bytes())?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adder_spec(tb: &Path) -> DesignSpec {
        DesignSpec {
            design_id: "adder_8bit".into(),
            description: "An 8-bit adder with carry out.".into(),
            module_name: "adder_8bit".into(),
            ports: vec![
                PortDecl::new("a", PortDirection::Input, 8),
                PortDecl::new("b", PortDirection::Input, 8),
                PortDecl::new("sum", PortDirection::Output, 9),
            ],
            testbench_path: tb.to_path_buf(),
            ppa_constraints: None,
        }
    }

    #[test]
    fn well_formed_spec_has_no_violations() {
        let dir = tempfile::tempdir().unwrap();
        let tb = dir.path().join("adder_8bit_tb.v");
        std::fs::write(&tb, "module tb; endmodule\n").unwrap();
        assert_eq!(validate_design_spec(&adder_spec(&tb)), Vec::<String>::new());
    }

    #[test]
    fn zero_width_port_is_reported_by_field() {
        let dir = tempfile::tempdir().unwrap();
        let tb = dir.path().join("tb.v");
        std::fs::write(&tb, "module tb; endmodule\n").unwrap();
        let mut spec = adder_spec(&tb);
        spec.ports[0].width_bits = 0;
        let violations = validate_design_spec(&spec);
        assert_eq!(
            violations,
            vec!["ports[0].width_bits must be ≥ 1".to_string()]
        );
    }

    #[test]
    fn missing_testbench_names_the_field() {
        let spec = adder_spec(Path::new("/nonexistent/adder_tb.v"));
        let violations = validate_design_spec(&spec);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("testbench_path"), "{violations:?}");
    }

    #[test]
    fn duplicate_port_names_detected() {
        let dir = tempfile::tempdir().unwrap();
        let tb = dir.path().join("tb.v");
        std::fs::write(&tb, "x").unwrap();
        let mut spec = adder_spec(&tb);
        spec.ports[1].name = "a".into();
        let violations = validate_design_spec(&spec);
        assert!(violations.iter().any(|v| v.contains("duplicates")));
    }

    #[test]
    fn verdict_severity_ordering() {
        let syntax = Diagnostic {
            kind: DiagnosticKind::Syntax,
            file: Some("a.v".into()),
            line: Some(3),
            message: "syntax error".into(),
            raw: "a.v:3: syntax error".into(),
        };
        let functional = Diagnostic {
            kind: DiagnosticKind::Functional,
            file: None,
            line: None,
            message: "mismatch".into(),
            raw: "FAILED: mismatch".into(),
        };
        let tool = Diagnostic {
            kind: DiagnosticKind::Tool,
            file: None,
            line: None,
            message: "timeout".into(),
            raw: String::new(),
        };
        assert_eq!(DiagnosticSet::verdict_of(&[]), Verdict::Clean);
        assert_eq!(
            DiagnosticSet::verdict_of(std::slice::from_ref(&functional)),
            Verdict::FunctionalFail
        );
        assert_eq!(
            DiagnosticSet::verdict_of(&[functional.clone(), syntax.clone()]),
            Verdict::SyntaxFail
        );
        assert_eq!(
            DiagnosticSet::verdict_of(&[functional, syntax, tool]),
            Verdict::ToolFail
        );
    }

    #[test]
    fn elaboration_counts_as_syntax_fail() {
        let d = Diagnostic {
            kind: DiagnosticKind::Elaboration,
            file: Some("a.v".into()),
            line: Some(1),
            message: "unknown module type".into(),
            raw: "a.v:1: error: unknown module type".into(),
        };
        assert_eq!(DiagnosticSet::verdict_of(&[d]), Verdict::SyntaxFail);
    }

    #[test]
    fn milestone_order_is_monotone() {
        assert!(Milestone::PpaPass > Milestone::FunctionalPass);
        assert!(Milestone::FunctionalPass > Milestone::SyntaxPass);
        assert!(Milestone::SyntaxPass > Milestone::Fail);
    }

    #[test]
    fn rectify_config_defaults_match_contract() {
        let cfg = RectifyConfig::default();
        assert_eq!(cfg.max_rounds_k, 4);
        assert_eq!(cfg.generations_n, 5);
        assert_eq!(cfg.temperature, 0.7);
        assert_eq!(cfg.context_length, 2048);
    }

    #[test]
    fn token_usage_sums() {
        let a = TokenUsage::new(10, 5);
        let b = TokenUsage::new(3, 2);
        let sum = a + b;
        assert_eq!(sum.total_tokens, 20);
        assert!(sum.is_consistent());
    }

    #[test]
    fn serde_round_trip_core_types() {
        let dir = tempfile::tempdir().unwrap();
        let tb = dir.path().join("tb.v");
        std::fs::write(&tb, "x").unwrap();
        let spec = adder_spec(&tb);
        let json = serde_json::to_string(&spec).unwrap();
        let back: DesignSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);

        let report = PpaReport::measured(500.0, 14.2, 211.6, 320.0);
        let json = serde_json::to_string(&report).unwrap();
        let back: PpaReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);

        let set = DiagnosticSet::from_diagnostics(vec![Diagnostic {
            kind: DiagnosticKind::Syntax,
            file: Some("adder.v".into()),
            line: Some(12),
            message: "syntax error".into(),
            raw: "adder.v:12: syntax error".into(),
        }]);
        let json = serde_json::to_string(&set).unwrap();
        let back: DiagnosticSet = serde_json::from_str(&json).unwrap();
        assert_eq!(set, back);
        assert!(back.is_consistent());

        // The remaining store types, including optional fields that
        // serialization skips when absent.
        let unsynth = PpaReport::unsynthesizable(vec!["stderr tail".into()]);
        let back: PpaReport =
            serde_json::from_str(&serde_json::to_string(&unsynth).unwrap()).unwrap();
        assert_eq!(unsynth, back);

        let source = VerilogSource::initial("module m(); endmodule", "a/attempt_0")
            .child("module m2(); endmodule");
        let back: VerilogSource =
            serde_json::from_str(&serde_json::to_string(&source).unwrap()).unwrap();
        assert_eq!(source, back);

        let cfg = RectifyConfig::default();
        let back: RectifyConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);

        let constraints = PpaConstraints {
            max_clock_ps: Some(300.0),
            ..Default::default()
        };
        let back: PpaConstraints =
            serde_json::from_str(&serde_json::to_string(&constraints).unwrap()).unwrap();
        assert_eq!(constraints, back);

        let message = ChatMessage::assistant("done");
        let back: ChatMessage =
            serde_json::from_str(&serde_json::to_string(&message).unwrap()).unwrap();
        assert_eq!(message, back);
    }

    #[test]
    fn stable_field_names_in_store_json() {
        let usage = TokenUsage::new(1, 2);
        let v = serde_json::to_value(usage).unwrap();
        assert!(v.get("prompt_tokens").is_some());
        assert!(v.get("completion_tokens").is_some());
        assert!(v.get("total_tokens").is_some());

        let report = PpaReport::measured(180.0, 587.31, 1005.67, 0.0);
        let v = serde_json::to_value(&report).unwrap();
        for key in [
            "clock_ps",
            "power_uw",
            "area_um2",
            "slack_ps",
            "synthesizable",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn run_record_monotonicity_validation() {
        let clean_record = RunRecord {
            attempt_id: "adder_8bit/attempt_0".into(),
            design_id: "adder_8bit".into(),
            rounds: vec![DiagnosticSet::clean()],
            final_verdict: Milestone::FunctionalPass,
            halted_by: HaltReason::Clean,
            transcripts: vec![],
            token_usage: TokenUsage::default(),
            reports: vec![],
        };
        assert!(clean_record.validate(4).is_empty());

        let mut bogus = clean_record.clone();
        bogus.final_verdict = Milestone::PpaPass; // no reports recorded
        assert!(!bogus.validate(4).is_empty());

        let mut inflated = clean_record.clone();
        inflated.rounds = vec![DiagnosticSet::clean(); 7];
        assert!(!inflated.validate(4).is_empty());

        let mut fake_pass = clean_record;
        fake_pass.rounds = vec![DiagnosticSet::from_diagnostics(vec![Diagnostic {
            kind: DiagnosticKind::Syntax,
            file: None,
            line: None,
            message: "nope".into(),
            raw: "nope".into(),
        }])];
        assert!(!fake_pass.validate(4).is_empty());
    }
}
