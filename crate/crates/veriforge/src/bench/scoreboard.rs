//! Pass-rate aggregation and rendering.
//!
//! Scoring is per attempt: the denominator is designs × attempts, so a
//! reported rate reconstructs as an integer count over it. Printed
//! percentages use two decimals TRUNCATED (not rounded); that is the
//! committed formatting rule and changing it changes every reported
//! number.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{Milestone, RunRecord};

/// Percentage with two truncated decimals, in pure integer arithmetic
/// so no float rounding can sneak a different digit in.
pub fn percent_truncated(numerator: u64, denominator: u64) -> String {
    if denominator == 0 {
        return "0.00".to_string();
    }
    let scaled = numerator * 10_000 / denominator;
    format!("{}.{:02}", scaled / 100, scaled % 100)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignScore {
    pub attempts: u64,
    pub syntax_passes: u64,
    pub functional_passes: u64,
    pub ppa_passes: u64,
}

/// Aggregated pass counts for one benchmark run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreBoard {
    pub attempts_total: u64,
    pub syntax_passes: u64,
    pub functional_passes: u64,
    pub ppa_passes: u64,
    pub per_design: BTreeMap<String, DesignScore>,
}

impl ScoreBoard {
    /// Recomputes the board from records; aggregation is a pure fold,
    /// so a stored board can always be checked against its records.
    pub fn from_records(records: &[RunRecord]) -> Self {
        let mut board = ScoreBoard::default();
        for record in records {
            board.add_attempt(&record.design_id, record.final_verdict);
        }
        board
    }

    pub fn add_attempt(&mut self, design_id: &str, milestone: Milestone) {
        self.attempts_total += 1;
        let design = self.per_design.entry(design_id.to_string()).or_default();
        design.attempts += 1;
        if milestone >= Milestone::SyntaxPass {
            self.syntax_passes += 1;
            design.syntax_passes += 1;
        }
        if milestone >= Milestone::FunctionalPass {
            self.functional_passes += 1;
            design.functional_passes += 1;
        }
        if milestone >= Milestone::PpaPass {
            self.ppa_passes += 1;
            design.ppa_passes += 1;
        }
    }

    pub fn syntax_rate_percent(&self) -> String {
        percent_truncated(self.syntax_passes, self.attempts_total)
    }

    pub fn functional_rate_percent(&self) -> String {
        percent_truncated(self.functional_passes, self.attempts_total)
    }

    /// Per-design rate: fraction of designs with at least one
    /// functionally passing attempt.
    pub fn per_design_functional_percent(&self) -> String {
        let passing = self
            .per_design
            .values()
            .filter(|d| d.functional_passes > 0)
            .count() as u64;
        percent_truncated(passing, self.per_design.len() as u64)
    }

    /// Unbiased pass@k estimate for functional correctness, averaged
    /// over designs: `1 - C(n-c, k) / C(n, k)` per design.
    pub fn pass_at_k(&self, k: u64) -> f64 {
        if self.per_design.is_empty() {
            return 0.0;
        }
        let sum: f64 = self
            .per_design
            .values()
            .map(|d| pass_at_k_single(d.attempts, d.functional_passes, k))
            .sum();
        sum / self.per_design.len() as f64
    }

    /// Markdown table mirroring the benchmark comparison layout:
    /// syntax and functionality columns, attempts as the denominator.
    pub fn render_markdown(&self, title: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("### {title}\n\n"));
        out.push_str("| Design | Attempts | Syntax (%) | Functionality (%) |\n");
        out.push_str("|---|---|---|---|\n");
        for (design, score) in &self.per_design {
            out.push_str(&format!(
                "| {design} | {} | {} | {} |\n",
                score.attempts,
                percent_truncated(score.syntax_passes, score.attempts),
                percent_truncated(score.functional_passes, score.attempts),
            ));
        }
        out.push_str(&format!(
            "| **overall** | {} | {} | {} |\n",
            self.attempts_total,
            self.syntax_rate_percent(),
            self.functional_rate_percent(),
        ));
        out
    }
}

fn pass_at_k_single(n: u64, c: u64, k: u64) -> f64 {
    if n == 0 || k == 0 {
        return 0.0;
    }
    if c == 0 {
        return 0.0;
    }
    if n.saturating_sub(c) < k {
        return 1.0;
    }
    // 1 - prod_{i=n-c+1..=n} (1 - k/i), the numerically stable form.
    let mut prod = 1.0f64;
    for i in (n - c + 1)..=n {
        prod *= 1.0 - k as f64 / i as f64;
    }
    1.0 - prod
}
