//! Token and compute cost comparison between prompting methods.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::RunRecord;

use super::scoreboard::{percent_truncated, ScoreBoard};

/// MAC estimate per generated/consumed token; the committed default
/// models a large hosted model's forward pass.
pub const DEFAULT_MACS_PER_TOKEN: f64 = 2.04e12;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("cost comparison requires non-empty record sets ({0} is empty)")]
    EmptyRecords(&'static str),
}

/// One method's totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub method: String,
    pub tokens: u64,
    /// `tokens × macs_per_token`, reported in trillions of MACs.
    pub estimated_macs_trillion: f64,
    pub syntax_rate_percent: String,
    pub functional_rate_percent: String,
}

/// Side-by-side comparison with absolute and percentage deltas,
/// relative to the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub method: CostRow,
    pub baseline: CostRow,
    /// Positive when the method used fewer tokens than the baseline.
    pub tokens_saved: i64,
    pub token_reduction_percent: String,
    pub macs_saved_trillion: f64,
}

fn row(method: &str, records: &[RunRecord], macs_per_token: f64) -> CostRow {
    let tokens: u64 = records.iter().map(|r| r.token_usage.total_tokens).sum();
    let board = ScoreBoard::from_records(records);
    CostRow {
        method: method.to_string(),
        tokens,
        estimated_macs_trillion: tokens as f64 * macs_per_token / 1e12,
        syntax_rate_percent: board.syntax_rate_percent(),
        functional_rate_percent: board.functional_rate_percent(),
    }
}

/// Builds the comparison table from two record sets. Token totals come
/// from the records' usage sums; rates from their milestones.
pub fn cost_report(
    method_records: &[RunRecord],
    baseline_records: &[RunRecord],
    macs_per_token: f64,
) -> Result<CostReport, CostError> {
    if method_records.is_empty() {
        return Err(CostError::EmptyRecords("method"));
    }
    if baseline_records.is_empty() {
        return Err(CostError::EmptyRecords("baseline"));
    }
    let method = row("multi_round_repair", method_records, macs_per_token);
    let baseline = row("plan_then_code_baseline", baseline_records, macs_per_token);
    let tokens_saved = baseline.tokens as i64 - method.tokens as i64;
    let token_reduction_percent = percent_truncated(tokens_saved.unsigned_abs(), baseline.tokens);
    let macs_saved_trillion = baseline.estimated_macs_trillion - method.estimated_macs_trillion;
    Ok(CostReport {
        method,
        baseline,
        tokens_saved,
        token_reduction_percent,
        macs_saved_trillion,
    })
}

impl CostReport {
    pub fn render_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| Method | MACs (trillion) | Tokens | Syntax (%) | Functionality (%) |\n");
        out.push_str("|---|---|---|---|---|\n");
        for row in [&self.baseline, &self.method] {
            out.push_str(&format!(
                "| {} | {:.2} | {} | {} | {} |\n",
                row.method,
                row.estimated_macs_trillion,
                row.tokens,
                row.syntax_rate_percent,
                row.functional_rate_percent,
            ));
        }
        out.push_str(&format!(
            "\n{} tokens saved ({}% reduction), {:.2} trillion MACs saved.\n",
            self.tokens_saved, self.token_reduction_percent, self.macs_saved_trillion
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HaltReason, Milestone, TokenUsage};

    fn records_with_tokens(total: u64, count: usize) -> Vec<RunRecord> {
        // Spread the total over `count` attempts; remainder on the first.
        let each = total / count as u64;
        let mut rem = total - each * count as u64;
        (0..count)
            .map(|i| {
                let extra = if rem > 0 {
                    rem -= 1;
                    1
                } else {
                    0
                };
                RunRecord {
                    attempt_id: format!("d/attempt_{i}"),
                    design_id: "d".into(),
                    rounds: vec![],
                    final_verdict: Milestone::FunctionalPass,
                    halted_by: HaltReason::Clean,
                    transcripts: vec![],
                    token_usage: TokenUsage::new(each + extra, 0),
                    reports: vec![],
                }
            })
            .collect()
    }

    /// The frozen one-iteration comparison: 317,446 baseline tokens
    /// vs 270,744, a 46,702-token delta, 14.71% reduction, and MAC
    /// estimates 647,589.84 and 552,317.76 trillion at 2.04e12
    /// MACs/token.
    #[test]
    fn frozen_cost_comparison_reconstructs() {
        let method = records_with_tokens(270_744, 29);
        let baseline = records_with_tokens(317_446, 29);
        let report = cost_report(&method, &baseline, DEFAULT_MACS_PER_TOKEN).unwrap();

        assert_eq!(report.method.tokens, 270_744);
        assert_eq!(report.baseline.tokens, 317_446);
        assert_eq!(report.tokens_saved, 46_702);
        assert_eq!(report.token_reduction_percent, "14.71");
        assert_eq!(
            format!("{:.2}", report.method.estimated_macs_trillion),
            "552317.76"
        );
        assert_eq!(
            format!("{:.2}", report.baseline.estimated_macs_trillion),
            "647589.84"
        );
    }

    #[test]
    fn identical_record_sets_have_zero_deltas() {
        let records = records_with_tokens(1000, 4);
        let report = cost_report(&records, &records, DEFAULT_MACS_PER_TOKEN).unwrap();
        assert_eq!(report.tokens_saved, 0);
        assert_eq!(report.token_reduction_percent, "0.00");
        assert_eq!(report.macs_saved_trillion, 0.0);
    }

    #[test]
    fn empty_sets_are_refused() {
        let records = records_with_tokens(10, 1);
        assert!(cost_report(&[], &records, DEFAULT_MACS_PER_TOKEN).is_err());
        assert!(cost_report(&records, &[], DEFAULT_MACS_PER_TOKEN).is_err());
    }

    #[test]
    fn markdown_carries_both_rows() {
        let method = records_with_tokens(100, 2);
        let baseline = records_with_tokens(150, 2);
        let table = cost_report(&method, &baseline, DEFAULT_MACS_PER_TOKEN)
            .unwrap()
            .render_markdown();
        assert!(table.contains("plan_then_code_baseline"));
        assert!(table.contains("multi_round_repair"));
        assert!(table.contains("50 tokens saved (33.33% reduction)"));
    }
}
