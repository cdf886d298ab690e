//! Builds every prompt in the system: initial generation, few-shot
//! variants, repair prompts from diagnostics, and PPA-aware
//! optimization prompts backed by an in-context-learning example bank.
//!
//! Templates and the ICL bank load from a plain directory (one text
//! file per template, one JSON file per ICL example) so prompts can be
//! edited without rebuilding. Rendering is deterministic: identical
//! inputs produce byte-identical messages.

mod icl;

pub use icl::{select_icl_examples, IclExample, OptimizationStrategy, StrategyRanking};

use std::collections::BTreeMap;
use std::path::Path;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ChatMessage, DesignSpec, DiagnosticSet, PortDecl, PortDirection, PpaConstraints, PpaReport,
    VerilogSource,
};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template {template}: placeholder {{{name}}} is not bound")]
    MissingPlaceholder { template: String, name: String },
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("repair prompt requires a non-clean diagnostic set")]
    NothingToRepair,
    #[error("PPA prompt requires at least one violated bound")]
    NoViolations,
    #[error("few-shot bank has {len} examples but {shots} shots requested")]
    ShotsExceedBank { shots: usize, len: usize },
    #[error("prompt asset {path}: {message}")]
    Asset { path: String, message: String },
}

/// A text template with `{name}` placeholders. Every placeholder the
/// body references must be bound at render time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: String,
    pub body: String,
    pub required_placeholders: Vec<String>,
}

static PLACEHOLDER: Lazy<Regex> = Lazy::new(|| Regex::new(r"\{([a-z][a-z0-9_]*)\}").unwrap());

impl PromptTemplate {
    pub fn new(template_id: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        let mut required: Vec<String> = PLACEHOLDER
            .captures_iter(&body)
            .map(|c| c[1].to_string())
            .collect();
        required.sort();
        required.dedup();
        Self {
            template_id: template_id.into(),
            body,
            required_placeholders: required,
        }
    }

    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<String, PromptError> {
        for name in &self.required_placeholders {
            if !bindings.contains_key(name.as_str()) {
                return Err(PromptError::MissingPlaceholder {
                    template: self.template_id.clone(),
                    name: name.clone(),
                });
            }
        }
        let mut out = self.body.clone();
        for (name, value) in bindings {
            out = out.replace(&format!("{{{name}}}"), value);
        }
        Ok(out)
    }
}

/// Worked (description, verilog) pairs prepended to generation prompts
/// as alternating user/assistant turns.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotBank {
    pub examples: Vec<FewShotExample>,
    #[serde(default)]
    pub shots: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub description: String,
    pub verilog: String,
}

impl FewShotBank {
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../../assets/few_shot.json"))
            .expect("builtin few-shot bank parses")
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|e| PromptError::Asset {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| PromptError::Asset {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn with_shots(mut self, shots: usize) -> Self {
        self.shots = shots;
        self
    }
}

/// All templates plus the ICL bank, ready to build prompts.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    templates: BTreeMap<String, PromptTemplate>,
    icl_bank: Vec<IclExample>,
    ranking: StrategyRanking,
    /// Cap on ICL examples included in one PPA prompt.
    pub icl_limit: usize,
}

const BUILTIN_TEMPLATES: &[(&str, &str)] = &[
    (
        "generation_system",
        include_str!("../../assets/templates/generation_system.txt"),
    ),
    (
        "generation_user",
        include_str!("../../assets/templates/generation_user.txt"),
    ),
    ("repair", include_str!("../../assets/templates/repair.txt")),
    ("ppa", include_str!("../../assets/templates/ppa.txt")),
    (
        "baseline_plan_then_code",
        include_str!("../../assets/templates/baseline_plan_then_code.txt"),
    ),
];

impl PromptLibrary {
    /// The committed templates and the four-strategy ICL bank.
    pub fn builtin() -> Self {
        let templates = BUILTIN_TEMPLATES
            .iter()
            .map(|(id, body)| ((*id).to_string(), PromptTemplate::new(*id, *body)))
            .collect();
        Self {
            templates,
            icl_bank: icl::builtin_bank(),
            ranking: StrategyRanking::default(),
            icl_limit: 2,
        }
    }

    /// Builtin library with overrides from a directory: `*.txt` files
    /// replace same-named templates, `icl/*.json` files replace the
    /// whole ICL bank when present.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut lib = Self::builtin();
        let entries = std::fs::read_dir(dir).map_err(|e| PromptError::Asset {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        for entry in entries.flatten() {
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) == Some("txt") {
                let id = path.file_stem().unwrap().to_string_lossy().to_string();
                let body = std::fs::read_to_string(&path).map_err(|e| PromptError::Asset {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                lib.templates
                    .insert(id.clone(), PromptTemplate::new(id, body));
            }
        }
        let icl_dir = dir.join("icl");
        if icl_dir.is_dir() {
            lib.icl_bank = icl::load_bank(&icl_dir)?;
        }
        Ok(lib)
    }

    pub fn template(&self, id: &str) -> Result<&PromptTemplate, PromptError> {
        self.templates
            .get(id)
            .ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
    }

    pub fn icl_bank(&self) -> &[IclExample] {
        &self.icl_bank
    }

    pub fn ranking(&self) -> &StrategyRanking {
        &self.ranking
    }

    pub fn set_ranking(&mut self, ranking: StrategyRanking) {
        self.ranking = ranking;
    }

    /// Initial generation conversation: system contract, `shots`
    /// worked examples as alternating user/assistant turns, then the
    /// design request.
    pub fn build_generation_prompt(
        &self,
        spec: &DesignSpec,
        bank: &FewShotBank,
    ) -> Result<Vec<ChatMessage>, PromptError> {
        if bank.shots > bank.examples.len() {
            return Err(PromptError::ShotsExceedBank {
                shots: bank.shots,
                len: bank.examples.len(),
            });
        }
        let system = self.template("generation_system")?.body.clone();
        let mut messages = vec![ChatMessage::system(system)];
        for example in &bank.examples[..bank.shots] {
            messages.push(ChatMessage::user(example.description.clone()));
            messages.push(ChatMessage::assistant(format!(
                "```verilog\n{}```",
                ensure_trailing_newline(&example.verilog)
            )));
        }
        let bindings = BTreeMap::from([
            ("description", spec.description.clone()),
            ("module_name", spec.module_name.clone()),
            ("ports", render_ports(&spec.ports)),
        ]);
        messages.push(ChatMessage::user(
            self.template("generation_user")?.render(&bindings)?,
        ));
        Ok(messages)
    }

    /// Single-turn baseline prompt used only for cost comparisons.
    pub fn build_baseline_prompt(
        &self,
        spec: &DesignSpec,
    ) -> Result<Vec<ChatMessage>, PromptError> {
        let bindings = BTreeMap::from([
            ("description", spec.description.clone()),
            ("module_name", spec.module_name.clone()),
            ("ports", render_ports(&spec.ports)),
        ]);
        Ok(vec![ChatMessage::user(
            self.template("baseline_plan_then_code")?
                .render(&bindings)?,
        )])
    }

    /// Repair turn: the full current source, every diagnostic verbatim,
    /// and the output contract. Refuses a clean diagnostic set.
    pub fn build_repair_prompt(
        &self,
        source: &VerilogSource,
        errors: &DiagnosticSet,
    ) -> Result<ChatMessage, PromptError> {
        if errors.is_clean() {
            return Err(PromptError::NothingToRepair);
        }
        let mut diagnostics = String::new();
        for d in &errors.diagnostics {
            let location = match (&d.file, d.line) {
                (Some(file), Some(line)) => format!(", {file}, line {line}"),
                (Some(file), None) => format!(", {file}"),
                (None, Some(line)) => format!(", line {line}"),
                (None, None) => String::new(),
            };
            diagnostics.push_str(&format!("- kind: {:?}{location}\n", d.kind));
            diagnostics.push_str(&format!("  message: {}\n", d.message));
            if !d.raw.is_empty() {
                diagnostics.push_str(&format!("  tool output: {}\n", d.raw));
            }
        }
        let bindings = BTreeMap::from([
            ("source", source.text.clone()),
            ("diagnostics", diagnostics),
        ]);
        Ok(ChatMessage::user(
            self.template("repair")?.render(&bindings)?,
        ))
    }

    /// PPA optimization turn: violated bounds as measured-vs-required,
    /// the four candidate strategies, and the selected worked examples.
    /// Refuses when nothing is violated.
    pub fn build_ppa_prompt(
        &self,
        source: &VerilogSource,
        report: &PpaReport,
        constraints: &PpaConstraints,
        icl: &[IclExample],
    ) -> Result<ChatMessage, PromptError> {
        let violations = violation_lines(report, constraints);
        if violations.is_empty() {
            return Err(PromptError::NoViolations);
        }
        let strategies = OptimizationStrategy::ALL
            .iter()
            .map(|s| s.display_name())
            .collect::<Vec<_>>()
            .join(", ");
        let mut icl_text = String::new();
        for example in icl {
            icl_text.push_str(&example.render());
            icl_text.push('\n');
        }
        if icl.is_empty() {
            icl_text.push_str("(none available)\n");
        }
        let bindings = BTreeMap::from([
            ("source", source.text.clone()),
            ("violations", violations.join("\n")),
            ("strategies", strategies),
            ("icl_examples", icl_text),
        ]);
        Ok(ChatMessage::user(self.template("ppa")?.render(&bindings)?))
    }
}

/// One "measured X vs required Y" line per violated bound.
pub fn violation_lines(report: &PpaReport, constraints: &PpaConstraints) -> Vec<String> {
    let mut lines = Vec::new();
    let checks = [
        ("clock", report.clock_ps, constraints.max_clock_ps, "ps"),
        ("power", report.power_uw, constraints.max_power_uw, "uW"),
        ("area", report.area_um2, constraints.max_area_um2, "um^2"),
    ];
    for (metric, measured, bound, unit) in checks {
        if let (Some(m), Some(b)) = (measured, bound) {
            if m > b {
                lines.push(format!(
                    "- {metric}: measured {m} {unit} vs required {b} {unit}"
                ));
            }
        }
    }
    lines
}

fn render_ports(ports: &[PortDecl]) -> String {
    if ports.is_empty() {
        return "  (as given in the description)".to_string();
    }
    ports
        .iter()
        .map(|p| {
            let dir = match p.direction {
                PortDirection::Input => "input",
                PortDirection::Output => "output",
                PortDirection::Inout => "inout",
            };
            if p.width_bits == 1 {
                format!("  {dir} {name}", name = p.name)
            } else {
                format!(
                    "  {dir} [{msb}:0] {name}",
                    msb = p.width_bits - 1,
                    name = p.name
                )
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn ensure_trailing_newline(text: &str) -> String {
    if text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    }
}
