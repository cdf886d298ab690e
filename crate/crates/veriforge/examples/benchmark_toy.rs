//! Runs the bundled three-design toy benchmark with the scripted
//! backend and stub simulator, prints the scoreboard, then validates
//! the run store it produced.
//!
//! Run with: cargo run --example benchmark_toy

use std::collections::BTreeMap;
use std::path::Path;

use veriforge::bench::{load_dataset, run_benchmark, BenchOptions, DatasetDescriptor};
use veriforge::config::Config;
use veriforge::prompt::{FewShotBank, PromptLibrary};
use veriforge::rectify::PipelineDeps;
use veriforge::store::RunStore;
use veriforge::synth::PpaStageConfig;
use veriforge::workbench::Workbench;

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let scratch = tempfile::tempdir().expect("scratch dir");

    // The committed toy config wires the scripted backend, the stub
    // simulator, and the dataset together.
    let config = Config::load(Some(&fixtures.join("config_toy.toml"))).unwrap();
    let desc = DatasetDescriptor::design_dirs(fixtures.join("designs"));

    let workbench = Workbench::new(
        config.simulator.clone(),
        config.parser_rules.compile().unwrap(),
    );
    let prompts = PromptLibrary::builtin();
    let few_shot = FewShotBank::builtin().with_shots(config.shots);
    let deps = PipelineDeps {
        backend: &config.backend,
        workbench: &workbench,
        prompts: &prompts,
        few_shot: &few_shot,
    };

    let store = RunStore::new(scratch.path().join("runs"));
    let run = store
        .create_run(
            Some("toy_demo".into()),
            config.snapshot(),
            None,
            BTreeMap::new(),
        )
        .unwrap();
    let loaded = load_dataset(&desc, &run.path().join("materialized"), false).unwrap();

    let result = run_benchmark(
        &loaded.specs,
        &config.rectify,
        &config.ppa_constraints,
        &PpaStageConfig::mock_default(),
        &deps,
        &run,
        &BenchOptions::default(),
    )
    .unwrap();

    print!("{}", result.scoreboard.render_markdown("toy dataset"));
    println!(
        "\nper-design functional rate: {}%",
        result.scoreboard.per_design_functional_percent()
    );
    println!("pass@1: {:.4}", result.scoreboard.pass_at_k(1));

    let problems = run.validate();
    if problems.is_empty() {
        println!("\nstore validation: ok ({})", run.path().display());
    } else {
        println!("\nstore validation problems:");
        for problem in problems {
            println!("  {problem}");
        }
    }
}
