//! The in-context-learning bank: before/after Verilog pairs with
//! measured PPA deltas, one curated example per optimization strategy.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{PpaConstraints, PpaReport};
use crate::prompt::PromptError;

/// The four candidate optimization strategies offered to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizationStrategy {
    Pipelining,
    ClockGating,
    ParallelOperation,
    HierarchicalDesign,
}

impl OptimizationStrategy {
    pub const ALL: [OptimizationStrategy; 4] = [
        OptimizationStrategy::Pipelining,
        OptimizationStrategy::ClockGating,
        OptimizationStrategy::ParallelOperation,
        OptimizationStrategy::HierarchicalDesign,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            OptimizationStrategy::Pipelining => "Pipelining",
            OptimizationStrategy::ClockGating => "Clock Gating",
            OptimizationStrategy::ParallelOperation => "Parallel Operation",
            OptimizationStrategy::HierarchicalDesign => "Hierarchical Design",
        }
    }
}

/// One worked optimization: the same design before and after applying a
/// strategy, with the measured reports for both versions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclExample {
    pub strategy: OptimizationStrategy,
    pub before_verilog: String,
    pub after_verilog: String,
    pub before_ppa: PpaReport,
    pub after_ppa: PpaReport,
    pub narrative: String,
}

impl IclExample {
    /// Prompt-ready rendering with the strategy name, both sources, and
    /// both measurements.
    pub fn render(&self) -> String {
        format!(
            "### Strategy: {name}\n{narrative}\n\nBefore ({before_nums}):\n```verilog\n{before}```\n\nAfter ({after_nums}):\n```verilog\n{after}```\n",
            name = self.strategy.display_name(),
            narrative = self.narrative,
            before_nums = ppa_summary(&self.before_ppa),
            after_nums = ppa_summary(&self.after_ppa),
            before = self.before_verilog,
            after = self.after_verilog,
        )
    }
}

fn ppa_summary(report: &PpaReport) -> String {
    format!(
        "clock {} ps, power {} uW, area {} um^2",
        report.clock_ps.unwrap_or(f64::NAN),
        report.power_uw.unwrap_or(f64::NAN),
        report.area_um2.unwrap_or(f64::NAN)
    )
}

const BUILTIN_ICL: &[&str] = &[
    include_str!("../../assets/icl/pipelining.json"),
    include_str!("../../assets/icl/clock_gating.json"),
    include_str!("../../assets/icl/parallel_operation.json"),
    include_str!("../../assets/icl/hierarchical_design.json"),
];

/// The committed four-example bank, one per strategy, in stable order.
pub fn builtin_bank() -> Vec<IclExample> {
    BUILTIN_ICL
        .iter()
        .map(|json| serde_json::from_str(json).expect("builtin ICL example parses"))
        .collect()
}

/// Loads every `*.json` example in a directory, sorted by file name.
pub fn load_bank(dir: &Path) -> Result<Vec<IclExample>, PromptError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| PromptError::Asset {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
        .collect();
    paths.sort();
    let mut bank = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Asset {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let example: IclExample = serde_json::from_str(&text).map_err(|e| PromptError::Asset {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        bank.push(example);
    }
    Ok(bank)
}

/// Which strategies historically improved each metric, best first. The
/// table is a deterministic default and can be overridden from config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRanking {
    pub clock: Vec<OptimizationStrategy>,
    pub power: Vec<OptimizationStrategy>,
    pub area: Vec<OptimizationStrategy>,
}

impl Default for StrategyRanking {
    fn default() -> Self {
        use OptimizationStrategy::*;
        Self {
            clock: vec![
                Pipelining,
                ParallelOperation,
                ClockGating,
                HierarchicalDesign,
            ],
            power: vec![
                ClockGating,
                Pipelining,
                ParallelOperation,
                HierarchicalDesign,
            ],
            area: vec![
                HierarchicalDesign,
                ParallelOperation,
                ClockGating,
                Pipelining,
            ],
        }
    }
}

impl StrategyRanking {
    /// Rank of a strategy for one violated-metric preference list;
    /// strategies missing from the list rank last.
    fn rank_in(list: &[OptimizationStrategy], strategy: OptimizationStrategy) -> usize {
        list.iter()
            .position(|&s| s == strategy)
            .unwrap_or(list.len())
    }

    /// Best rank of `strategy` across the violated metrics. `violated`
    /// marks each violated metric with a present bound.
    fn rank(&self, violated: &PpaConstraints, strategy: OptimizationStrategy) -> usize {
        let mut best = usize::MAX;
        if violated.max_clock_ps.is_some() {
            best = best.min(Self::rank_in(&self.clock, strategy));
        }
        if violated.max_power_uw.is_some() {
            best = best.min(Self::rank_in(&self.power, strategy));
        }
        if violated.max_area_um2.is_some() {
            best = best.min(Self::rank_in(&self.area, strategy));
        }
        best
    }
}

/// Picks at most `limit` bank examples for a PPA prompt. `violated`
/// carries only the violated bounds (present field = violated metric);
/// examples whose strategy ranks best for those metrics come first,
/// ties broken by bank order.
pub fn select_icl_examples(
    violated: &PpaConstraints,
    bank: &[IclExample],
    limit: usize,
    ranking: &StrategyRanking,
) -> Vec<IclExample> {
    let mut indexed: Vec<(usize, &IclExample)> = bank.iter().enumerate().collect();
    indexed.sort_by_key(|(i, e)| (ranking.rank(violated, e.strategy), *i));
    indexed
        .into_iter()
        .take(limit)
        .map(|(_, e)| e.clone())
        .collect()
}
