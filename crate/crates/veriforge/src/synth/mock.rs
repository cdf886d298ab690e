//! Deterministic stand-in for a proprietary synthesis flow.
//!
//! The mock computes slack as `clock − intrinsic_delay` and reports
//! constant power/area per design row. Rows are keyed by the top
//! (last-declared) module name in the source; a `<name>_pipelined`
//! variant without its own row derives one from the base row's
//! pipeline factors.

use std::collections::BTreeMap;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::PpaReport;

/// Per-design mock synthesis characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockDesignRow {
    pub intrinsic_delay_ps: f64,
    pub base_power_uw: f64,
    pub base_area_um2: f64,
    #[serde(default = "default_speedup")]
    pub pipeline_speedup: f64,
    #[serde(default = "default_area_factor")]
    pub pipeline_area_factor: f64,
    #[serde(default = "default_power_factor")]
    pub pipeline_power_factor: f64,
}

fn default_speedup() -> f64 {
    2.0
}
fn default_area_factor() -> f64 {
    1.6
}
fn default_power_factor() -> f64 {
    1.5
}

impl MockDesignRow {
    pub fn new(intrinsic_delay_ps: f64, base_power_uw: f64, base_area_um2: f64) -> Self {
        Self {
            intrinsic_delay_ps,
            base_power_uw,
            base_area_um2,
            pipeline_speedup: default_speedup(),
            pipeline_area_factor: default_area_factor(),
            pipeline_power_factor: default_power_factor(),
        }
    }

    fn pipelined(self) -> Self {
        Self {
            intrinsic_delay_ps: self.intrinsic_delay_ps / self.pipeline_speedup,
            base_power_uw: self.base_power_uw * self.pipeline_power_factor,
            base_area_um2: self.base_area_um2 * self.pipeline_area_factor,
            ..self
        }
    }
}

/// Design table plus a default row for unknown modules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockModelParams {
    pub default: MockDesignRow,
    #[serde(default)]
    pub table: BTreeMap<String, MockDesignRow>,
}

impl Default for MockModelParams {
    fn default() -> Self {
        Self::builtin()
    }
}

impl MockModelParams {
    /// The committed table: the bundled toy designs, the ICL bank
    /// designs, and the 32-bit adder optimization scenario.
    pub fn builtin() -> Self {
        let mut table = BTreeMap::new();
        // Toy dataset designs.
        table.insert("adder_8bit".into(), MockDesignRow::new(318.5, 6.3, 38.5));
        table.insert("mux2_8bit".into(), MockDesignRow::new(54.7, 215.3, 86.1));
        table.insert("counter_4bit".into(), MockDesignRow::new(134.4, 33.1, 40.6));
        // Clock-constrained adder scenario: the pipelined rewrite has
        // its own explicit row.
        table.insert("adder_32bit".into(), MockDesignRow::new(500.0, 14.2, 211.6));
        table.insert(
            "adder_32bit_pipelined".into(),
            MockDesignRow::new(180.0, 587.31, 1005.67),
        );
        // ICL bank designs, before and after each strategy.
        table.insert("mul_add_16".into(), MockDesignRow::new(500.0, 95.0, 820.0));
        table.insert(
            "mul_add_16_pipelined".into(),
            MockDesignRow::new(190.0, 152.0, 1150.0),
        );
        table.insert(
            "shift_register_32".into(),
            MockDesignRow::new(120.0, 210.0, 340.0),
        );
        table.insert(
            "shift_register_32_gated".into(),
            MockDesignRow::new(125.0, 58.0, 365.0),
        );
        table.insert("sum_tree_8".into(), MockDesignRow::new(640.0, 40.0, 300.0));
        table.insert(
            "sum_tree_8_parallel".into(),
            MockDesignRow::new(210.0, 55.0, 330.0),
        );
        table.insert("alu_16".into(), MockDesignRow::new(450.0, 160.0, 1400.0));
        table.insert(
            "alu_16_hier".into(),
            MockDesignRow::new(430.0, 150.0, 980.0),
        );
        Self {
            default: MockDesignRow::new(250.0, 100.0, 500.0),
            table,
        }
    }

    /// Row for a design name: exact match, then a factor-derived
    /// `_pipelined` variant of a known base, then the default row.
    pub fn row_for(&self, design_name: &str) -> MockDesignRow {
        if let Some(row) = self.table.get(design_name) {
            return *row;
        }
        if let Some(base) = design_name.strip_suffix("_pipelined") {
            if let Some(row) = self.table.get(base) {
                return row.pipelined();
            }
        }
        self.default
    }
}

static MODULE_DECL: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\bmodule\s+([A-Za-z_][A-Za-z0-9_$]*)").unwrap());

/// Top module name: the last `module` declaration in the source, which
/// is where the bundled hierarchical examples put it.
pub fn top_module_name(source_text: &str) -> Option<String> {
    MODULE_DECL
        .captures_iter(source_text)
        .last()
        .map(|c| c[1].to_string())
}

/// Mock synthesis at one clock constraint. Unsynthesizable unless the
/// source passes a trivial structural scan (contains both `module` and
/// `endmodule` words).
pub fn synthesize(source_text: &str, clock_ps: f64, params: &MockModelParams) -> PpaReport {
    let has_end = source_text
        .split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
        .any(|w| w == "endmodule");
    let name = top_module_name(source_text);
    if name.is_none() || !has_end {
        return PpaReport::unsynthesizable(vec![
            "structural scan: source lacks a module/endmodule pair".to_string(),
        ]);
    }
    let row = params.row_for(&name.unwrap());
    PpaReport::measured(
        clock_ps,
        row.base_power_uw,
        row.base_area_um2,
        clock_ps - row.intrinsic_delay_ps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_is_clock_minus_intrinsic() {
        let mut params = MockModelParams::builtin();
        params
            .table
            .insert("dut".into(), MockDesignRow::new(180.0, 10.0, 20.0));
        let met = synthesize("module dut(); endmodule", 500.0, &params);
        assert_eq!(met.slack_ps, Some(320.0));
        assert!(met.timing_met());

        let violated = synthesize("module dut(); endmodule", 100.0, &params);
        assert_eq!(violated.slack_ps, Some(-80.0));
        assert!(!violated.timing_met());
    }

    #[test]
    fn missing_endmodule_is_unsynthesizable() {
        let report = synthesize("module dut();", 500.0, &MockModelParams::builtin());
        assert!(!report.synthesizable);
        assert!(report.clock_ps.is_none());
        assert!(!report.tool_warnings.is_empty());
    }

    #[test]
    fn endmodule_word_must_stand_alone() {
        // "xendmodulex" must not satisfy the structural scan.
        let report = synthesize(
            "module dut(); xendmodulex",
            500.0,
            &MockModelParams::builtin(),
        );
        assert!(!report.synthesizable);
    }

    #[test]
    fn top_module_is_last_declaration() {
        let source = "module helper(); endmodule\nmodule top_design(); endmodule\n";
        assert_eq!(top_module_name(source).as_deref(), Some("top_design"));
    }

    #[test]
    fn pipelined_variant_derives_from_base_factors() {
        let mut params = MockModelParams::builtin();
        params.table.insert(
            "thing".into(),
            MockDesignRow {
                intrinsic_delay_ps: 400.0,
                base_power_uw: 10.0,
                base_area_um2: 100.0,
                pipeline_speedup: 2.0,
                pipeline_area_factor: 1.5,
                pipeline_power_factor: 1.25,
            },
        );
        let row = params.row_for("thing_pipelined");
        assert_eq!(row.intrinsic_delay_ps, 200.0);
        assert_eq!(row.base_power_uw, 12.5);
        assert_eq!(row.base_area_um2, 150.0);
    }

    #[test]
    fn explicit_variant_row_wins_over_derivation() {
        let params = MockModelParams::builtin();
        let row = params.row_for("adder_32bit_pipelined");
        assert_eq!(row.intrinsic_delay_ps, 180.0);
        assert_eq!(row.base_power_uw, 587.31);
        assert_eq!(row.base_area_um2, 1005.67);
    }

    #[test]
    fn unknown_design_gets_default_row() {
        let params = MockModelParams::builtin();
        let report = synthesize("module mystery(); endmodule", 300.0, &params);
        assert_eq!(report.power_uw, Some(params.default.base_power_uw));
    }

    /// The committed ICL bank numbers are exactly what this mock
    /// produces for the bank's own sources at the reported clocks.
    #[test]
    fn icl_bank_numbers_come_from_this_mock() {
        let params = MockModelParams::builtin();
        for example in crate::prompt::select_icl_examples(
            &crate::model::PpaConstraints {
                max_clock_ps: Some(1.0),
                max_power_uw: Some(1.0),
                max_area_um2: Some(1.0),
            },
            crate::prompt::PromptLibrary::builtin().icl_bank(),
            usize::MAX,
            &crate::prompt::StrategyRanking::default(),
        ) {
            let before = synthesize(
                &example.before_verilog,
                example.before_ppa.clock_ps.unwrap(),
                &params,
            );
            assert_eq!(before, example.before_ppa, "{:?} before", example.strategy);
            let after = synthesize(
                &example.after_verilog,
                example.after_ppa.clock_ps.unwrap(),
                &params,
            );
            assert_eq!(after, example.after_ppa, "{:?} after", example.strategy);
        }
    }
}
