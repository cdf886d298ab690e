//! Drives the bounded repair loop with a scripted backend whose third
//! reply finally fixes the design, printing the verdict of every round.
//!
//! Run with: cargo run --example repair_loop

use veriforge::gateway::{BackendConfig, Gateway, ScriptEntry};
use veriforge::model::{ChatMessage, DesignSpec, RectifyConfig, VerilogSource};
use veriforge::prompt::{FewShotBank, PromptLibrary};
use veriforge::rectify::{rectify, Conversation, PipelineDeps};
use veriforge::workbench::{stub_simulator, ParserRules, Workbench};

const BROKEN_SYNTAX: &str = "module demo();\n  wire x // FORCE_SYNTAX_FAIL\nendmodule\n";
const BROKEN_FUNC: &str = "module demo();\n  // FORCE_FUNC_FAIL\nendmodule\n";
const FIXED: &str = "module demo();\n  // all good now\nendmodule\n";

fn main() {
    let scratch = tempfile::tempdir().expect("scratch dir");
    let root = scratch.path();

    let tb = root.join("demo_tb.v");
    std::fs::write(&tb, "module demo_tb; endmodule\n").unwrap();
    let spec = DesignSpec {
        design_id: "demo".into(),
        description: "demo design".into(),
        module_name: "demo".into(),
        ports: vec![],
        testbench_path: tb,
        ppa_constraints: None,
    };

    // The script plays the role of the model: still broken, broken in a
    // new way, then fixed.
    let script: Vec<ScriptEntry> = [BROKEN_SYNTAX, BROKEN_FUNC, FIXED]
        .iter()
        .map(|code| ScriptEntry {
            response: format!("Let me try again:\n```verilog\n{code}```"),
            prompt_tokens: 90,
            completion_tokens: 40,
        })
        .collect();
    let script_path = root.join("script.json");
    std::fs::write(&script_path, serde_json::to_string(&script).unwrap()).unwrap();

    let backend = BackendConfig::scripted(&script_path);
    let gateway = Gateway::new(backend.clone()).unwrap();
    let workbench = Workbench::new(
        stub_simulator(&root.join("tools")).unwrap(),
        ParserRules::default(),
    );
    let prompts = PromptLibrary::builtin();
    let few_shot = FewShotBank::default();
    let deps = PipelineDeps {
        backend: &backend,
        workbench: &workbench,
        prompts: &prompts,
        few_shot: &few_shot,
    };

    let mut conversation =
        Conversation::new(vec![ChatMessage::user("(generation already happened)")]);
    let outcome = rectify(
        VerilogSource::initial(BROKEN_SYNTAX, "demo/attempt_0"),
        &spec,
        &RectifyConfig::default(),
        &deps,
        &gateway,
        &mut conversation,
        &root.join("attempt_0"),
    )
    .expect("environment is fine");

    for (i, (source, errors)) in outcome.round_log.iter().enumerate() {
        println!(
            "round {i}: verdict={} ({} diagnostics, round index {})",
            errors.verdict,
            errors.diagnostics.len(),
            source.round
        );
    }
    println!(
        "halted by {:?} after {} repair rounds; {} backend calls, {} tokens",
        outcome.halted_by,
        outcome.rounds_used,
        gateway.calls(),
        conversation.usage.total_tokens
    );
}
