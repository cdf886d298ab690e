//! Runs the compile-and-simulate check on the bundled golden adder and
//! two seeded mutations of it, printing each verdict.
//!
//! Uses the real simulator (iverilog/vvp) when installed, otherwise the
//! bundled stub so the example stays runnable offline.
//!
//! Run with: cargo run --example simulate_check

use std::path::Path;

use veriforge::model::{DesignSpec, VerilogSource};
use veriforge::workbench::{stub_simulator, ParserRules, SimulatorConfig, Workbench};

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let scratch = tempfile::tempdir().expect("scratch dir");

    let real = Workbench::new(SimulatorConfig::default(), ParserRules::default());
    let workbench = match real.probe_version() {
        Some(version) => {
            println!("simulator: {version}");
            real
        }
        None => {
            println!("simulator: not installed, using the bundled stub");
            let sim = stub_simulator(&scratch.path().join("tools")).unwrap();
            Workbench::new(sim, ParserRules::default())
        }
    };

    let spec = DesignSpec {
        design_id: "adder_8bit".into(),
        description: String::new(),
        module_name: "adder_8bit".into(),
        ports: vec![],
        testbench_path: fixtures.join("designs/adder_8bit/testbench.v"),
        ppa_constraints: None,
    };

    let golden = std::fs::read_to_string(fixtures.join("designs/adder_8bit/golden.v")).unwrap();
    let cases = [
        ("golden", golden.clone()),
        (
            "missing semicolon",
            std::fs::read_to_string(
                fixtures.join("mutations/adder_8bit/syntax_missing_semicolon.v"),
            )
            .unwrap()
            // The stub needs its marker; harmless under iverilog.
            .replace("endmodule", "// FORCE_SYNTAX_FAIL\nendmodule"),
        ),
        (
            "plus became minus",
            std::fs::read_to_string(fixtures.join("mutations/adder_8bit/func_subtract.v"))
                .unwrap()
                .replace("endmodule", "// FORCE_FUNC_FAIL\nendmodule"),
        ),
    ];

    for (i, (label, text)) in cases.iter().enumerate() {
        let source = VerilogSource::initial(text.clone(), format!("demo/attempt_{i}"));
        let workdir = scratch.path().join(format!("check_{i}"));
        match workbench.check(&source, &spec, &workdir) {
            Ok(set) => {
                println!("\n[{label}] verdict: {}", set.verdict);
                for diag in &set.diagnostics {
                    println!("  {:?} {}", diag.kind, diag.raw);
                }
            }
            Err(e) => println!("\n[{label}] environment error: {e}"),
        }
    }
}
