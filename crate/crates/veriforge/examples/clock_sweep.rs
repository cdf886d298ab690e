//! Sweeps the clock constraint of the bundled 32-bit adder (and its
//! pipelined rewrite) against the mock synthesis model, and shows the
//! SDC text emitted at the found period.
//!
//! Run with: cargo run --example clock_sweep

use std::path::Path;

use veriforge::model::VerilogSource;
use veriforge::synth::{
    emit_sdc, sweep_min_clock, MockModelParams, SweepConfig, SynthBackendConfig,
};

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/adder_32bit");
    let backend = SynthBackendConfig::mock(MockModelParams::builtin());
    let sweep = SweepConfig::default();
    let scratch = tempfile::tempdir().expect("scratch dir");

    let meta: veriforge::bench::DesignMeta =
        serde_json::from_str(&std::fs::read_to_string(fixtures.join("meta.json")).unwrap())
            .unwrap();

    for file in ["golden.v", "pipelined.v"] {
        let text = std::fs::read_to_string(fixtures.join(file)).unwrap();
        let source = VerilogSource::initial(text, "sweep_demo");
        let result = sweep_min_clock(
            &source,
            &meta.ports,
            &backend,
            &sweep,
            &scratch.path().join(file),
        )
        .expect("feasible in range");
        println!(
            "{file}: min_clock_ps: {:?} (power {:?} uW, area {:?} um^2, {} synth calls)",
            result.min_clock_ps,
            result.report.power_uw.unwrap(),
            result.report.area_um2.unwrap(),
            result.synth_calls
        );
        println!("--- SDC at that period ---");
        print!("{}", emit_sdc(result.min_clock_ps, &meta.ports));
        println!();
    }
}
