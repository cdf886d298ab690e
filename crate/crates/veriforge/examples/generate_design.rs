//! End-to-end single-design run: generation prompt, scripted backend,
//! repair loop, and the audit trail it leaves in the run store.
//!
//! Run with: cargo run --example generate_design

use std::path::Path;

use veriforge::gateway::BackendConfig;
use veriforge::model::RectifyConfig;
use veriforge::prompt::{FewShotBank, PromptLibrary};
use veriforge::rectify::{generate_and_rectify, PipelineDeps};
use veriforge::workbench::{ParserRules, SimulatorConfig, Workbench};

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let scratch = tempfile::tempdir().expect("scratch dir");

    // Load the bundled mux design the dataset way.
    let desc = veriforge::bench::DatasetDescriptor::design_dirs(fixtures.join("designs"));
    let loaded = veriforge::bench::load_dataset(&desc, scratch.path(), false).unwrap();
    let spec = loaded
        .specs
        .into_iter()
        .find(|s| s.design_id == "mux2_8bit")
        .unwrap();
    println!("design: {} (module {})", spec.design_id, spec.module_name);

    // Scripted backend from the toy fixtures: attempt 0 needs one
    // repair round, attempt 1 is clean immediately.
    let backend = BackendConfig::scripted(fixtures.join("scripts/toy"));
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

    let cfg = RectifyConfig {
        generations_n: 2,
        ..Default::default()
    };
    let design_dir = scratch.path().join("designs/mux2_8bit");
    let attempts = generate_and_rectify(&spec, &cfg, &deps, &design_dir).unwrap();

    for attempt in &attempts {
        println!(
            "{}: milestone={} halted_by={:?} rounds={} tokens={}",
            attempt.attempt_id,
            attempt.milestone(),
            attempt.halted_by,
            attempt.outcome.as_ref().map(|o| o.rounds_used).unwrap_or(0),
            attempt.token_usage.total_tokens
        );
    }

    println!("\naudit trail under {}:", design_dir.display());
    let mut paths: Vec<_> = walk(&design_dir);
    paths.sort();
    for path in paths {
        println!("  {}", path.strip_prefix(scratch.path()).unwrap().display());
    }
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                out.extend(walk(&path));
            } else {
                out.push(path);
            }
        }
    }
    out
}
