//! Feeds sample compiler and simulation output through the diagnostic
//! parser and prints the structured result.
//!
//! Run with: cargo run --example parse_diagnostics

use veriforge::workbench::{parse_simulator_output, ParserRules, Stream};

fn main() {
    let rules = ParserRules::default();

    let compile_output = "\
adder_8bit.v:6: syntax error
adder_8bit.v:6: error: Syntax error in continuous assignment
adder_8bit_tb.v:14: error: Unknown module type: ader_8bit
sorry: case inside is not yet supported
some chatter the parser ignores
";
    println!("--- compile stream ---");
    for diag in parse_simulator_output(Stream::Compile, compile_output, &rules) {
        println!(
            "{:?} kind={:?} file={:?} line={:?}",
            diag.message, diag.kind, diag.file, diag.line
        );
    }

    let run_output = "\
VCD info: dumpfile dump.vcd opened
FAILED: a=255 b=255 sum=254 expected=510
Test 3 failed: expected 8'h1f got 8'h1e
All other chatter is ignored
";
    println!("--- run stream ---");
    for diag in parse_simulator_output(Stream::Run, run_output, &rules) {
        println!("{:?} kind={:?}", diag.raw, diag.kind);
    }
}
