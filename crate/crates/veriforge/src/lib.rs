//! Orchestration toolchain that turns natural-language hardware design
//! descriptions into Verilog through a pluggable text-generation
//! backend, repairs candidates with structured simulator diagnostics in
//! a bounded multi-round loop, then gates and optimizes the result
//! against power/performance/area constraints via a synthesis adapter
//! and clock sweep. A benchmark runner scores whole datasets and
//! compares token costs between prompting methods.
//!
//! Start with the runnable examples (`cargo run --example <name>`):
//! each one drives a major capability end to end with the deterministic
//! scripted backend, the stub simulator, and the mock synthesis model,
//! so none of them needs network access or an EDA installation.

pub mod bench;
pub mod config;
pub mod gateway;
pub mod model;
pub mod prompt;
pub mod rectify;
pub mod store;
pub mod synth;
pub mod tokenizer;
pub mod workbench;

pub use model::{
    validate_design_spec, ChatMessage, DesignSpec, Diagnostic, DiagnosticKind, DiagnosticSet,
    HaltReason, Milestone, PortDecl, PortDirection, PpaConstraints, PpaReport, RectifyConfig, Role,
    RunRecord, TokenUsage, Verdict, VerilogSource,
};

pub use gateway::{BackendConfig, BackendKind, Gateway, GatewayError};
pub use prompt::{FewShotBank, IclExample, OptimizationStrategy, PromptLibrary};
pub use rectify::{
    generate_and_rectify, rectify, Conversation, GenerationAttempt, PipelineDeps, RectifyOutcome,
};
pub use synth::{
    emit_sdc, optimize_ppa, parse_reports, ppa_gate, sweep_min_clock, synthesize, GateOutcome,
    MockModelParams, PpaOutcome, PpaStageConfig, SweepConfig, SynthBackendConfig,
};
pub use tokenizer::count_tokens;
pub use workbench::{extract_verilog, parse_simulator_output, Workbench, WorkbenchError};
