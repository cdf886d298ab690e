//! Turns raw compiler and simulation output into structured diagnostics.
//!
//! The parser is total: any byte sequence in, a (possibly empty) list of
//! diagnostics out. Patterns are per-dataset configuration because
//! testbench conventions differ between benchmark suites.

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::{Diagnostic, DiagnosticKind};

/// Which tool stream a chunk of output came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Compile,
    Run,
}

/// Serializable per-dataset pattern set; compile with [`RulesConfig::compile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulesConfig {
    /// Matches `<path>:<line>: <message>` with named groups `file`,
    /// `line`, `msg`.
    #[serde(default = "default_location_grammar")]
    pub location_grammar: String,
    #[serde(default = "default_pass_marker")]
    pub pass_marker: String,
    #[serde(default = "default_fail_marker")]
    pub fail_marker: String,
    /// A located compile message containing any of these (case
    /// insensitive) is an elaboration error rather than plain syntax.
    #[serde(default = "default_elaboration_keywords")]
    pub elaboration_keywords: Vec<String>,
    /// Unlocated lines containing any of these become tool diagnostics.
    #[serde(default = "default_severity_keywords")]
    pub severity_keywords: Vec<String>,
}

fn default_location_grammar() -> String {
    r"^(?P<file>[^:\s][^:]*?):(?P<line>\d+):\s*(?P<msg>.*)$".to_string()
}
fn default_pass_marker() -> String {
    r"(?i)all tests passed|your design passed".to_string()
}
fn default_fail_marker() -> String {
    r"(?i)fail|error".to_string()
}
fn default_elaboration_keywords() -> Vec<String> {
    ["elaborat", "unknown module", "port", "instantiat"]
        .map(String::from)
        .to_vec()
}
fn default_severity_keywords() -> Vec<String> {
    [
        "internal error",
        "sorry:",
        "vvp:",
        "unable to open",
        "assertion",
    ]
    .map(String::from)
    .to_vec()
}

impl Default for RulesConfig {
    fn default() -> Self {
        Self {
            location_grammar: default_location_grammar(),
            pass_marker: default_pass_marker(),
            fail_marker: default_fail_marker(),
            elaboration_keywords: default_elaboration_keywords(),
            severity_keywords: default_severity_keywords(),
        }
    }
}

impl RulesConfig {
    pub fn compile(&self) -> Result<ParserRules, regex::Error> {
        Ok(ParserRules {
            location_grammar: Regex::new(&self.location_grammar)?,
            pass_marker: Regex::new(&self.pass_marker)?,
            fail_marker: Regex::new(&self.fail_marker)?,
            elaboration_keywords: self
                .elaboration_keywords
                .iter()
                .map(|k| k.to_ascii_lowercase())
                .collect(),
            severity_keywords: self
                .severity_keywords
                .iter()
                .map(|k| k.to_ascii_lowercase())
                .collect(),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Compiled pattern set used by the parser and the check harness.
#[derive(Debug, Clone)]
pub struct ParserRules {
    pub location_grammar: Regex,
    pub pass_marker: Regex,
    pub fail_marker: Regex,
    elaboration_keywords: Vec<String>,
    severity_keywords: Vec<String>,
}

impl Default for ParserRules {
    fn default() -> Self {
        RulesConfig::default()
            .compile()
            .expect("default rules compile")
    }
}

impl ParserRules {
    fn is_elaboration(&self, message: &str) -> bool {
        let lower = message.to_ascii_lowercase();
        self.elaboration_keywords.iter().any(|k| lower.contains(k))
    }

    fn is_severe(&self, line: &str) -> bool {
        let lower = line.to_ascii_lowercase();
        self.severity_keywords.iter().any(|k| lower.contains(k))
    }
}

/// Parses one tool stream into diagnostics. Total on any input; lines
/// that match nothing are ignored.
///
/// Compile stream: lines matching the location grammar become syntax
/// (or elaboration) diagnostics. Run stream: lines matching the fail
/// marker become functional diagnostics. In both streams, unmatched
/// lines containing a severity keyword become tool diagnostics.
pub fn parse_simulator_output(stream: Stream, text: &str, rules: &ParserRules) -> Vec<Diagnostic> {
    let mut diagnostics = Vec::new();
    for raw_line in text.lines() {
        match stream {
            Stream::Compile => {
                if let Some(caps) = rules.location_grammar.captures(raw_line) {
                    let message = caps
                        .name("msg")
                        .map(|m| m.as_str())
                        .unwrap_or("")
                        .to_string();
                    let kind = if rules.is_elaboration(&message) {
                        DiagnosticKind::Elaboration
                    } else {
                        DiagnosticKind::Syntax
                    };
                    diagnostics.push(Diagnostic {
                        kind,
                        file: caps.name("file").map(|m| m.as_str().to_string()),
                        line: caps
                            .name("line")
                            .and_then(|m| m.as_str().parse::<u32>().ok())
                            .filter(|&n| n >= 1),
                        message,
                        raw: raw_line.to_string(),
                    });
                    continue;
                }
            }
            Stream::Run => {
                if rules.fail_marker.is_match(raw_line) {
                    diagnostics.push(Diagnostic {
                        kind: DiagnosticKind::Functional,
                        file: None,
                        line: None,
                        message: raw_line.trim().to_string(),
                        raw: raw_line.to_string(),
                    });
                    continue;
                }
            }
        }
        if rules.is_severe(raw_line) {
            diagnostics.push(Diagnostic {
                kind: DiagnosticKind::Tool,
                file: None,
                line: None,
                message: raw_line.trim().to_string(),
                raw: raw_line.to_string(),
            });
        }
    }
    diagnostics
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rules() -> ParserRules {
        ParserRules::default()
    }

    #[test]
    fn compile_location_line_becomes_syntax_diagnostic() {
        let diags = parse_simulator_output(Stream::Compile, "adder.v:12: syntax error", &rules());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::Syntax);
        assert_eq!(diags[0].file.as_deref(), Some("adder.v"));
        assert_eq!(diags[0].line, Some(12));
        assert_eq!(diags[0].message, "syntax error");
        assert_eq!(diags[0].raw, "adder.v:12: syntax error");
    }

    #[test]
    fn elaboration_keyword_reclassifies() {
        let text = "tb.v:4: error: Unknown module type: addr_8bit";
        let diags = parse_simulator_output(Stream::Compile, text, &rules());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::Elaboration);
    }

    #[test]
    fn run_fail_line_becomes_functional_diagnostic() {
        let text = "Test 3 failed: expected 8'h1f got 8'h1e";
        let diags = parse_simulator_output(Stream::Run, text, &rules());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::Functional);
        assert_eq!(diags[0].raw, text);
    }

    #[test]
    fn multiple_failures_keep_order() {
        let text = "FAILED: case 1\nsome chatter\nFAILED: case 2\nFAILED: case 3\n";
        let diags = parse_simulator_output(Stream::Run, text, &rules());
        let raws: Vec<&str> = diags.iter().map(|d| d.raw.as_str()).collect();
        assert_eq!(
            raws,
            vec!["FAILED: case 1", "FAILED: case 2", "FAILED: case 3"]
        );
    }

    #[test]
    fn severity_keyword_becomes_tool_diagnostic() {
        let text = "sorry: constant selects in always_* processes are not yet supported";
        let diags = parse_simulator_output(Stream::Compile, text, &rules());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::Tool);
    }

    #[test]
    fn empty_input_yields_nothing() {
        assert!(parse_simulator_output(Stream::Compile, "", &rules()).is_empty());
        assert!(parse_simulator_output(Stream::Run, "", &rules()).is_empty());
    }

    #[test]
    fn pass_chatter_is_ignored() {
        let text = "VCD info: dumpfile dump.vcd opened\nAll tests passed\n";
        assert!(parse_simulator_output(Stream::Run, text, &rules()).is_empty());
    }

    #[test]
    fn rules_config_round_trips_and_compiles() {
        let config = RulesConfig::default();
        let json = serde_json::to_string(&config).unwrap();
        let back: RulesConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
        back.compile().unwrap();
    }

    proptest! {
        /// Totality: arbitrary bytes (lossily decoded) never panic and
        /// every produced raw is a substring of the input.
        #[test]
        fn parser_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let text = String::from_utf8_lossy(&bytes);
            for stream in [Stream::Compile, Stream::Run] {
                let diags = parse_simulator_output(stream, &text, &rules());
                for d in diags {
                    prop_assert!(text.contains(&d.raw));
                }
            }
        }
    }
}
