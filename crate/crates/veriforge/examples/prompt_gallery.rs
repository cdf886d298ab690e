//! Renders one prompt of each kind the pipeline sends: initial
//! generation (zero-shot and few-shot), repair, and PPA optimization.
//!
//! Run with: cargo run --example prompt_gallery

use veriforge::model::{
    DesignSpec, Diagnostic, DiagnosticKind, DiagnosticSet, PortDecl, PortDirection, PpaConstraints,
    PpaReport, VerilogSource,
};
use veriforge::prompt::{select_icl_examples, FewShotBank, PromptLibrary};
use veriforge::rectify::render_transcript;

fn main() {
    let prompts = PromptLibrary::builtin();
    let spec = DesignSpec {
        design_id: "adder_8bit".into(),
        description: "An 8-bit unsigned adder with a 9-bit sum output.".into(),
        module_name: "adder_8bit".into(),
        ports: vec![
            PortDecl::new("a", PortDirection::Input, 8),
            PortDecl::new("b", PortDirection::Input, 8),
            PortDecl::new("sum", PortDirection::Output, 9),
        ],
        testbench_path: "adder_8bit_tb.v".into(),
        ppa_constraints: None,
    };

    println!("================ generation (zero-shot) ================");
    let zero_shot = prompts
        .build_generation_prompt(&spec, &FewShotBank::default())
        .unwrap();
    print!("{}", render_transcript(&zero_shot));

    println!("================ generation (2-shot) ===================");
    let two_shot = prompts
        .build_generation_prompt(&spec, &FewShotBank::builtin().with_shots(2))
        .unwrap();
    println!("({} messages; example turns elided here)", two_shot.len());

    println!("================ repair =================================");
    let source = VerilogSource::initial(
        "module adder_8bit(input [7:0] a, input [7:0] b, output [8:0] sum);\n  assign sum = a + b\nendmodule\n",
        "demo/attempt_0",
    );
    let errors = DiagnosticSet::from_diagnostics(vec![Diagnostic {
        kind: DiagnosticKind::Syntax,
        file: Some("adder_8bit.v".into()),
        line: Some(3),
        message: "syntax error".into(),
        raw: "adder_8bit.v:3: syntax error".into(),
    }]);
    let repair = prompts.build_repair_prompt(&source, &errors).unwrap();
    println!("{}", repair.content);

    println!("================ PPA optimization =======================");
    let report = PpaReport::measured(500.0, 14.2, 211.6, 0.0);
    let constraints = PpaConstraints {
        max_clock_ps: Some(300.0),
        ..Default::default()
    };
    let icl = select_icl_examples(&constraints, prompts.icl_bank(), 1, prompts.ranking());
    let ppa = prompts
        .build_ppa_prompt(&source, &report, &constraints, &icl)
        .unwrap();
    println!("{}", ppa.content);
}
