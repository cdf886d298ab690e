//! Compiles and simulates candidate Verilog against its testbench,
//! producing structured diagnostics.
//!
//! The simulator is two external commands (compile, run) with argument
//! templates, defaulting to the iverilog/vvp pair, so the harness stays
//! tool-agnostic and is testable with a stub executable.

mod extract;
mod parse;

pub use extract::{extract_verilog, ExtractError};
pub use parse::{parse_simulator_output, ParserRules, RulesConfig, Stream};

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::model::{DesignSpec, Diagnostic, DiagnosticKind, DiagnosticSet, VerilogSource};

/// External simulator commands as argv templates. Placeholders
/// `{source_file}`, `{testbench_file}`, `{output_binary}` are
/// substituted per call; commands run with the per-check workdir as
/// their working directory so tool output carries relative paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorConfig {
    #[serde(default = "default_compile_command")]
    pub compile_command: Vec<String>,
    #[serde(default = "default_run_command")]
    pub run_command: Vec<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_compile_command() -> Vec<String> {
    [
        "iverilog",
        "-o",
        "{output_binary}",
        "{source_file}",
        "{testbench_file}",
    ]
    .map(String::from)
    .to_vec()
}
fn default_run_command() -> Vec<String> {
    ["vvp", "{output_binary}"].map(String::from).to_vec()
}
fn default_timeout_secs() -> u64 {
    30
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            compile_command: default_compile_command(),
            run_command: default_run_command(),
            timeout_secs: default_timeout_secs(),
        }
    }
}

#[derive(Debug, Error)]
pub enum WorkbenchError {
    /// The simulator binary is absent: an environment problem, distinct
    /// from any verdict about the design.
    #[error("simulator binary not found: {program}")]
    SimulatorMissing { program: String },
    #[error("testbench unreadable: {path}: {source}")]
    Testbench {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("workdir error: {context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("simulator command template is empty")]
    EmptyCommand,
}

/// The check harness: one compile+simulate pipeline per call, isolated
/// in a caller-supplied workdir. No shared mutable state, so concurrent
/// checks are fine.
#[derive(Debug, Clone)]
pub struct Workbench {
    sim: SimulatorConfig,
    rules: ParserRules,
}

struct ProcOutput {
    success: bool,
    status: Option<i32>,
    text: String,
    timed_out: bool,
}

impl Workbench {
    pub fn new(sim: SimulatorConfig, rules: ParserRules) -> Self {
        Self { sim, rules }
    }

    pub fn rules(&self) -> &ParserRules {
        &self.rules
    }

    pub fn simulator(&self) -> &SimulatorConfig {
        &self.sim
    }

    /// First line of the compile tool's `-V` output, for the run
    /// manifest. None when the tool is absent.
    pub fn probe_version(&self) -> Option<String> {
        let program = self.sim.compile_command.first()?;
        let out = Command::new(program).arg("-V").output().ok()?;
        let text = String::from_utf8_lossy(&out.stdout);
        let line = text.lines().next().map(|l| l.trim().to_string());
        line.filter(|l| !l.is_empty())
    }

    /// Compiles `source` together with the design's testbench, then runs
    /// the simulation, classifying all tool output into a
    /// [`DiagnosticSet`].
    ///
    /// Verdict is clean iff the compile succeeded, the run printed the
    /// pass marker, and nothing matched a fail or severity pattern.
    /// Missing simulator and unreadable testbench are environment
    /// errors, not verdicts.
    pub fn check(
        &self,
        source: &VerilogSource,
        spec: &DesignSpec,
        workdir: &Path,
    ) -> Result<DiagnosticSet, WorkbenchError> {
        std::fs::create_dir_all(workdir).map_err(|e| WorkbenchError::Io {
            context: workdir.display().to_string(),
            source: e,
        })?;

        let source_file = format!("{}.v", spec.module_name);
        let testbench_file = spec
            .testbench_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "testbench.v".to_string());
        let output_binary = "sim.out".to_string();

        std::fs::write(workdir.join(&source_file), &source.text).map_err(|e| {
            WorkbenchError::Io {
                context: source_file.clone(),
                source: e,
            }
        })?;
        let tb_text =
            std::fs::read(&spec.testbench_path).map_err(|e| WorkbenchError::Testbench {
                path: spec.testbench_path.clone(),
                source: e,
            })?;
        std::fs::write(workdir.join(&testbench_file), tb_text).map_err(|e| WorkbenchError::Io {
            context: testbench_file.clone(),
            source: e,
        })?;

        let substitute = |arg: &str| {
            arg.replace("{source_file}", &source_file)
                .replace("{testbench_file}", &testbench_file)
                .replace("{output_binary}", &output_binary)
        };

        let compile_argv: Vec<String> = self
            .sim
            .compile_command
            .iter()
            .map(|a| substitute(a))
            .collect();
        let compile = self.run_command(&compile_argv, workdir, None)?;
        if !compile.success {
            let mut diagnostics =
                parse_simulator_output(Stream::Compile, &compile.text, &self.rules);
            if diagnostics.is_empty() {
                // Keep "non-clean implies diagnostics" even when the tool
                // prints nothing we recognize.
                diagnostics.push(synthetic_tool_diag(format!(
                    "compile failed with status {:?}: {}",
                    compile.status,
                    tail(&compile.text, 200)
                )));
            }
            return Ok(DiagnosticSet::from_diagnostics(diagnostics));
        }

        let run_argv: Vec<String> = self.sim.run_command.iter().map(|a| substitute(a)).collect();
        let timeout = Duration::from_secs(self.sim.timeout_secs);
        let run = self.run_command(&run_argv, workdir, Some(timeout))?;
        if run.timed_out {
            return Ok(DiagnosticSet::from_diagnostics(vec![synthetic_tool_diag(
                "timeout".to_string(),
            )]));
        }

        let mut diagnostics = parse_simulator_output(Stream::Run, &run.text, &self.rules);
        if diagnostics.is_empty() {
            if !run.success {
                diagnostics.push(synthetic_tool_diag(format!(
                    "simulation exited with status {:?}: {}",
                    run.status,
                    tail(&run.text, 200)
                )));
            } else if !self.rules.pass_marker.is_match(&run.text) {
                diagnostics.push(Diagnostic {
                    kind: DiagnosticKind::Functional,
                    file: None,
                    line: None,
                    message: "pass marker not found in simulation output".to_string(),
                    raw: String::new(),
                });
            }
        }
        Ok(DiagnosticSet::from_diagnostics(diagnostics))
    }

    fn run_command(
        &self,
        argv: &[String],
        workdir: &Path,
        timeout: Option<Duration>,
    ) -> Result<ProcOutput, WorkbenchError> {
        let (program, args) = argv.split_first().ok_or(WorkbenchError::EmptyCommand)?;
        let mut child = Command::new(program)
            .args(args)
            .current_dir(workdir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    WorkbenchError::SimulatorMissing {
                        program: program.clone(),
                    }
                } else {
                    WorkbenchError::Io {
                        context: format!("spawn {program}"),
                        source: e,
                    }
                }
            })?;

        // Drain pipes on threads so a chatty child can't deadlock
        // against a full pipe buffer while we wait.
        let mut stdout_pipe = child.stdout.take().expect("stdout piped");
        let mut stderr_pipe = child.stderr.take().expect("stderr piped");
        let stdout_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout_pipe.read_to_end(&mut buf);
            buf
        });
        let stderr_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr_pipe.read_to_end(&mut buf);
            buf
        });

        let (status, timed_out) = match timeout {
            Some(limit) => match child.wait_timeout(limit).map_err(|e| WorkbenchError::Io {
                context: format!("wait {program}"),
                source: e,
            })? {
                Some(status) => (Some(status), false),
                None => {
                    let _ = child.kill();
                    let _ = child.wait();
                    (None, true)
                }
            },
            None => (
                Some(child.wait().map_err(|e| WorkbenchError::Io {
                    context: format!("wait {program}"),
                    source: e,
                })?),
                false,
            ),
        };

        let stdout = stdout_reader.join().unwrap_or_default();
        let stderr = stderr_reader.join().unwrap_or_default();
        let mut text = String::from_utf8_lossy(&stdout).into_owned();
        if !stderr.is_empty() {
            if !text.is_empty() && !text.ends_with('\n') {
                text.push('\n');
            }
            text.push_str(&String::from_utf8_lossy(&stderr));
        }
        Ok(ProcOutput {
            success: status.map(|s| s.success()).unwrap_or(false),
            status: status.and_then(|s| s.code()),
            text,
            timed_out,
        })
    }
}

fn synthetic_tool_diag(message: String) -> Diagnostic {
    Diagnostic {
        kind: DiagnosticKind::Tool,
        file: None,
        line: None,
        message,
        raw: String::new(),
    }
}

fn tail(text: &str, max: usize) -> String {
    let trimmed = text.trim();
    if trimmed.len() <= max {
        trimmed.to_string()
    } else {
        let cut = trimmed.len() - max;
        let boundary = (cut..trimmed.len())
            .find(|&i| trimmed.is_char_boundary(i))
            .unwrap_or(trimmed.len());
        format!("…{}", &trimmed[boundary..])
    }
}

/// Builds a stub simulator driven by markers in the design source, for
/// tests and offline examples. The compile step reports a syntax error
/// at the marker's own line when `FORCE_SYNTAX_FAIL` appears, otherwise
/// concatenates design+testbench into the "binary". The run step fails
/// checks when `FORCE_FUNC_FAIL` appears, hangs on `FORCE_TOOL_HANG`,
/// and prints the pass marker otherwise.
pub fn stub_simulator(dir: &Path) -> std::io::Result<SimulatorConfig> {
    std::fs::create_dir_all(dir)?;
    let compile = dir.join("stub_compile.sh");
    let run = dir.join("stub_run.sh");
    std::fs::write(&compile, STUB_COMPILE_SH)?;
    std::fs::write(&run, STUB_RUN_SH)?;
    Ok(SimulatorConfig {
        compile_command: vec![
            "sh".into(),
            compile.display().to_string(),
            "{source_file}".into(),
            "{testbench_file}".into(),
            "{output_binary}".into(),
        ],
        run_command: vec![
            "sh".into(),
            run.display().to_string(),
            "{output_binary}".into(),
        ],
        timeout_secs: 2,
    })
}

pub const STUB_COMPILE_SH: &str = r#"#!/bin/sh
# stub compile: $1=source $2=testbench $3=output
if grep -q "FORCE_SYNTAX_FAIL" "$1"; then
  n=$(grep -n "FORCE_SYNTAX_FAIL" "$1" | head -1 | cut -d: -f1)
  echo "$1:$n: syntax error" 1>&2
  echo "1 error(s) during parsing." 1>&2
  exit 1
fi
if grep -q "FORCE_ELAB_FAIL" "$1"; then
  echo "$2:3: error: Unknown module type: no_such_module" 1>&2
  exit 2
fi
cat "$1" "$2" > "$3"
exit 0
"#;

pub const STUB_RUN_SH: &str = r#"#!/bin/sh
# stub run: $1=compiled image
if grep -q "FORCE_FUNC_FAIL" "$1"; then
  echo "FAILED: sum expected 8'h1f got 8'h1e"
  echo "FAILED: sum expected 8'h20 got 8'h1f"
  exit 0
fi
if grep -q "FORCE_TOOL_HANG" "$1"; then
  sleep 30
fi
echo "All tests passed"
exit 0
"#;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Verdict;

    fn golden_source() -> &'static str {
        "module adder_8bit(input [7:0] a, input [7:0] b, output [8:0] sum);\n  assign sum = a + b;\nendmodule\n"
    }

    fn spec_in(dir: &Path) -> DesignSpec {
        let tb = dir.join("adder_8bit_tb.v");
        std::fs::write(&tb, "module tb; endmodule\n").unwrap();
        DesignSpec {
            design_id: "adder_8bit".into(),
            description: "8-bit adder".into(),
            module_name: "adder_8bit".into(),
            ports: vec![],
            testbench_path: tb,
            ppa_constraints: None,
        }
    }

    fn workbench_in(dir: &Path) -> Workbench {
        let sim = stub_simulator(&dir.join("tools")).unwrap();
        Workbench::new(sim, ParserRules::default())
    }

    #[test]
    fn clean_design_yields_clean_verdict() {
        let dir = tempfile::tempdir().unwrap();
        let wb = workbench_in(dir.path());
        let spec = spec_in(dir.path());
        let src = VerilogSource::initial(golden_source(), "t0");
        let set = wb.check(&src, &spec, &dir.path().join("wd")).unwrap();
        assert_eq!(set.verdict, Verdict::Clean);
        assert!(set.diagnostics.is_empty());
    }

    #[test]
    fn syntax_marker_maps_to_syntax_fail_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let wb = workbench_in(dir.path());
        let spec = spec_in(dir.path());
        let text = "module adder_8bit();\n  wire x // FORCE_SYNTAX_FAIL\nendmodule\n";
        let src = VerilogSource::initial(text, "t0");
        let set = wb.check(&src, &spec, &dir.path().join("wd")).unwrap();
        assert_eq!(set.verdict, Verdict::SyntaxFail);
        assert_eq!(set.diagnostics[0].line, Some(2));
        assert_eq!(set.diagnostics[0].file.as_deref(), Some("adder_8bit.v"));
    }

    #[test]
    fn functional_marker_maps_to_functional_fail_quoting_lines() {
        let dir = tempfile::tempdir().unwrap();
        let wb = workbench_in(dir.path());
        let spec = spec_in(dir.path());
        let text = "module adder_8bit();\n// FORCE_FUNC_FAIL\nendmodule\n";
        let src = VerilogSource::initial(text, "t0");
        let set = wb.check(&src, &spec, &dir.path().join("wd")).unwrap();
        assert_eq!(set.verdict, Verdict::FunctionalFail);
        assert_eq!(set.diagnostics.len(), 2);
        assert!(set.diagnostics[0].raw.contains("8'h1f"));
    }

    #[test]
    fn elaboration_failure_is_syntax_severity() {
        let dir = tempfile::tempdir().unwrap();
        let wb = workbench_in(dir.path());
        let spec = spec_in(dir.path());
        let text = "module adder_8bit();\n// FORCE_ELAB_FAIL\nendmodule\n";
        let src = VerilogSource::initial(text, "t0");
        let set = wb.check(&src, &spec, &dir.path().join("wd")).unwrap();
        assert_eq!(set.verdict, Verdict::SyntaxFail);
        assert_eq!(set.diagnostics[0].kind, DiagnosticKind::Elaboration);
    }

    #[test]
    fn hang_times_out_as_tool_fail() {
        let dir = tempfile::tempdir().unwrap();
        let mut sim = stub_simulator(&dir.path().join("tools")).unwrap();
        sim.timeout_secs = 1;
        let wb = Workbench::new(sim, ParserRules::default());
        let spec = spec_in(dir.path());
        let text = "module adder_8bit();\n// FORCE_TOOL_HANG\nendmodule\n";
        let src = VerilogSource::initial(text, "t0");
        let set = wb.check(&src, &spec, &dir.path().join("wd")).unwrap();
        assert_eq!(set.verdict, Verdict::ToolFail);
        assert_eq!(set.diagnostics[0].message, "timeout");
    }

    #[test]
    fn missing_simulator_is_environment_error_not_verdict() {
        let dir = tempfile::tempdir().unwrap();
        let sim = SimulatorConfig {
            compile_command: vec![
                "definitely-not-a-simulator-xyz".into(),
                "{source_file}".into(),
            ],
            run_command: vec!["also-missing".into()],
            timeout_secs: 1,
        };
        let wb = Workbench::new(sim, ParserRules::default());
        let spec = spec_in(dir.path());
        let src = VerilogSource::initial(golden_source(), "t0");
        let err = wb.check(&src, &spec, &dir.path().join("wd")).unwrap_err();
        assert!(matches!(err, WorkbenchError::SimulatorMissing { .. }));
    }

    #[test]
    fn check_is_deterministic_across_workdirs() {
        let dir = tempfile::tempdir().unwrap();
        let wb = workbench_in(dir.path());
        let spec = spec_in(dir.path());
        let text = "module adder_8bit();\n  wire x // FORCE_SYNTAX_FAIL\nendmodule\n";
        let src = VerilogSource::initial(text, "t0");
        let a = wb.check(&src, &spec, &dir.path().join("wd_a")).unwrap();
        let b = wb.check(&src, &spec, &dir.path().join("wd_b")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unreadable_testbench_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let wb = workbench_in(dir.path());
        let mut spec = spec_in(dir.path());
        spec.testbench_path = dir.path().join("missing_tb.v");
        let src = VerilogSource::initial(golden_source(), "t0");
        let err = wb.check(&src, &spec, &dir.path().join("wd")).unwrap_err();
        assert!(matches!(err, WorkbenchError::Testbench { .. }));
    }
}
