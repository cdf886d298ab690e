//! The full clock-optimization flow on the bundled 32-bit adder: the
//! plain ripple adder closes at 500 ps, misses its 300 ps bound, the
//! scripted backend answers the optimization prompt with a pipelined
//! rewrite, correctness is re-established, and the re-sweep lands at
//! 180 ps.
//!
//! Run with: cargo run --example ppa_optimization

use std::path::Path;

use veriforge::gateway::{BackendConfig, Gateway};
use veriforge::model::{ChatMessage, PpaConstraints, RectifyConfig, VerilogSource};
use veriforge::prompt::{FewShotBank, PromptLibrary};
use veriforge::rectify::{Conversation, PipelineDeps};
use veriforge::synth::{optimize_ppa, PpaStageConfig};
use veriforge::workbench::{ParserRules, SimulatorConfig, Workbench};

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let scenario = fixtures.join("adder_32bit");
    let scratch = tempfile::tempdir().expect("scratch dir");

    let desc = veriforge::bench::DatasetDescriptor::design_dirs(&fixtures);
    let spec = veriforge::bench::load_dataset(&desc, scratch.path(), true)
        .unwrap()
        .specs
        .into_iter()
        .find(|s| s.design_id == "adder_32bit")
        .unwrap();
    let constraints: PpaConstraints = spec.ppa_constraints.clone().unwrap();
    println!(
        "constraint: clock <= {} ps",
        constraints.max_clock_ps.unwrap()
    );

    // Committed script: reply 1 is the plain adder (already consumed by
    // "generation" here), reply 2 answers the optimization prompt with
    // the pipelined rewrite.
    let backend = BackendConfig::scripted(scenario.join("script.json"));
    let gateway = Gateway::new(backend.clone()).unwrap();
    let simulator = SimulatorConfig {
        compile_command: vec![
            "sh".into(),
            fixtures.join("stubsim/compile.sh").display().to_string(),
            "{source_file}".into(),
            "{testbench_file}".into(),
            "{output_binary}".into(),
        ],
        run_command: vec![
            "sh".into(),
            fixtures.join("stubsim/run.sh").display().to_string(),
            "{output_binary}".into(),
        ],
        timeout_secs: 5,
    };
    let workbench = Workbench::new(simulator, ParserRules::default());
    let prompts = PromptLibrary::builtin();
    let few_shot = FewShotBank::default();
    let deps = PipelineDeps {
        backend: &backend,
        workbench: &workbench,
        prompts: &prompts,
        few_shot: &few_shot,
    };

    // Seed the conversation as if generation just returned the plain
    // adder (script entry 0).
    let mut conversation = Conversation::new(vec![ChatMessage::user("design request")]);
    let reply = conversation.complete(&gateway).unwrap();
    let original = VerilogSource::initial(
        veriforge::extract_verilog(&reply.content).unwrap(),
        "adder_32bit/attempt_0",
    );

    let outcome = optimize_ppa(
        original,
        &spec,
        &constraints,
        &RectifyConfig::default(),
        &deps,
        &gateway,
        &mut conversation,
        &PpaStageConfig::mock_default(),
        &scratch.path().join("attempt_0"),
    )
    .expect("environment is fine");

    for (i, report) in outcome.reports.iter().enumerate() {
        println!(
            "sweep {}: clock {:?} ps, power {:?} uW, area {:?} um^2",
            i + 1,
            report.clock_ps.unwrap(),
            report.power_uw.unwrap(),
            report.area_um2.unwrap()
        );
    }
    println!(
        "gate: {} after {} optimization round(s), halted by {:?}",
        if outcome.gate.passed() {
            "PASS"
        } else {
            "FAIL"
        },
        outcome.ppa_rounds_used,
        outcome.halted_by
    );
    println!("final min clock: {:?} ps", outcome.min_clock_ps.unwrap());
    let top = veriforge::synth::top_module_name(&outcome.final_source.text).unwrap();
    println!("adopted design: module {top}");
}
