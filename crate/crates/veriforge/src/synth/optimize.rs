//! Constraint-driven optimization: sweep, gate, and when the gate
//! fails, re-prompt the model with strategy examples, re-establish
//! correctness, and re-sweep.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::Gateway;
use crate::model::{
    DesignSpec, HaltReason, PpaConstraints, PpaReport, RectifyConfig, VerilogSource,
};
use crate::prompt::select_icl_examples;
use crate::rectify::{rectify, Conversation, PipelineDeps};
use crate::workbench::{extract_verilog, WorkbenchError};

use super::{
    emit_sdc, ppa_gate, sweep_min_clock, violated_bounds, GateOutcome, SweepConfig, SweepError,
    SynthBackendConfig, SynthError,
};

/// Synthesis backend, sweep parameters, and the optimization budget.
/// `max_ppa_rounds` caps sweep+gate evaluations, so up to
/// `max_ppa_rounds - 1` rewrites happen between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpaStageConfig {
    pub backend: SynthBackendConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_max_ppa_rounds")]
    pub max_ppa_rounds: u32,
}

fn default_max_ppa_rounds() -> u32 {
    2
}

impl PpaStageConfig {
    pub fn mock_default() -> Self {
        Self {
            backend: SynthBackendConfig::mock(super::MockModelParams::builtin()),
            sweep: SweepConfig::default(),
            max_ppa_rounds: default_max_ppa_rounds(),
        }
    }
}

/// How the optimization loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PpaHalt {
    GatePass,
    RoundBudget,
    RectifyFailure,
    BackendFailure,
    ExtractionFailure,
    Infeasible,
}

/// Result of the PPA stage for one functionally correct design. When
/// the gate never passed, the returned design is the best known
/// functionally-correct candidate (smallest normalized violation) and
/// `gate` carries its violations — clearly an unoptimized fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpaOutcome {
    pub final_source: VerilogSource,
    pub final_report: PpaReport,
    pub min_clock_ps: Option<f64>,
    pub gate: GateOutcome,
    /// Rewrite cycles adopted (0 when the original already passed).
    pub ppa_rounds_used: u32,
    pub reports: Vec<PpaReport>,
    pub halted_by: PpaHalt,
    pub synth_calls: u32,
}

/// Environment failures of either tool stage.
#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Workbench(#[from] WorkbenchError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

#[derive(Serialize)]
struct PpaRoundRecord<'a> {
    round: u32,
    min_clock_ps: Option<f64>,
    report: &'a PpaReport,
    gate: &'a GateOutcome,
}

struct Candidate {
    source: VerilogSource,
    report: PpaReport,
    min_clock_ps: Option<f64>,
    gate: GateOutcome,
    score: f64,
}

/// Drives a functionally clean design through the quality gate.
///
/// Every round sweeps for the fastest feasible clock and applies the
/// gate; on failure, the model is asked for a functionally equivalent
/// rewrite (with strategy examples selected for the violated metrics),
/// the rewrite is repaired back to functional correctness, and the
/// loop re-sweeps. Any returned design has passed the correctness
/// check; the batch never panics on loop failures.
#[allow(clippy::too_many_arguments)]
pub fn optimize_ppa(
    source: VerilogSource,
    spec: &DesignSpec,
    constraints: &PpaConstraints,
    cfg: &RectifyConfig,
    deps: &PipelineDeps<'_>,
    gateway: &Gateway,
    conversation: &mut Conversation,
    stage: &PpaStageConfig,
    attempt_dir: &Path,
) -> Result<PpaOutcome, StageError> {
    let ppa_dir = attempt_dir.join("ppa");
    let mut reports: Vec<PpaReport> = Vec::new();
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut current = source;
    let mut rewrites: u32 = 0;
    let mut synth_calls: u32 = 0;

    let halted_by = 'rounds: {
        for round in 1..=stage.max_ppa_rounds {
            let round_dir = ppa_dir.join(format!("round_{round}"));
            let sweep = match sweep_min_clock(
                &current,
                &spec.ports,
                &stage.backend,
                &stage.sweep,
                &round_dir,
            ) {
                Ok(result) => result,
                Err(SweepError::Infeasible { report, .. }) => {
                    reports.push((*report).clone());
                    candidates.push(Candidate {
                        source: current.clone(),
                        report: *report,
                        min_clock_ps: None,
                        gate: GateOutcome::Fail(vec![]),
                        score: f64::INFINITY,
                    });
                    break 'rounds PpaHalt::Infeasible;
                }
                Err(SweepError::Synth(e)) => return Err(e.into()),
                Err(SweepError::Config(msg)) => return Err(SynthError::InvalidConfig(msg).into()),
            };
            synth_calls += sweep.synth_calls;
            let report = sweep.report;
            reports.push(report.clone());
            persist(
                &ppa_dir.join("sdc"),
                &format!("round_{round}.sdc"),
                &emit_sdc(sweep.min_clock_ps, &spec.ports),
            );

            let gate = ppa_gate(&report, constraints)?;
            persist_json(
                &ppa_dir,
                &format!("ppa_round_{round}.json"),
                &PpaRoundRecord {
                    round,
                    min_clock_ps: Some(sweep.min_clock_ps),
                    report: &report,
                    gate: &gate,
                },
            );

            if gate.passed() {
                return Ok(PpaOutcome {
                    final_source: current,
                    min_clock_ps: Some(sweep.min_clock_ps),
                    gate,
                    ppa_rounds_used: rewrites,
                    final_report: report,
                    reports,
                    halted_by: PpaHalt::GatePass,
                    synth_calls,
                });
            }

            candidates.push(Candidate {
                source: current.clone(),
                score: violation_score(&report, constraints),
                min_clock_ps: Some(sweep.min_clock_ps),
                gate: gate.clone(),
                report: report.clone(),
            });
            if round == stage.max_ppa_rounds {
                break 'rounds PpaHalt::RoundBudget;
            }

            // Rewrite cycle: strategy examples ranked for the violated
            // metrics, then correctness is re-established before the
            // next sweep judges the rewrite.
            let violated = violated_bounds(&report, constraints);
            let icl = select_icl_examples(
                &violated,
                deps.prompts.icl_bank(),
                deps.prompts.icl_limit,
                deps.prompts.ranking(),
            );
            let prompt = deps
                .prompts
                .build_ppa_prompt(&current, &report, constraints, &icl)
                .expect("gate failure implies at least one violation");
            persist(&round_dir, "ppa_prompt.txt", &prompt.content);
            conversation.push(prompt);
            let response = match conversation.complete(gateway) {
                Ok(reply) => reply,
                Err(_) => break 'rounds PpaHalt::BackendFailure,
            };
            persist(&round_dir, "ppa_response.txt", &response.content);
            let text = match extract_verilog(&response.content) {
                Ok(text) => text,
                Err(_) => break 'rounds PpaHalt::ExtractionFailure,
            };

            let candidate = VerilogSource {
                text,
                round: 0,
                attempt_id: current.attempt_id.clone(),
                parent: Some(format!("{}/ppa_round_{round}", current.attempt_id)),
            };
            let outcome = rectify(
                candidate,
                spec,
                cfg,
                deps,
                gateway,
                conversation,
                &round_dir.join("rectify"),
            )?;
            if outcome.halted_by != HaltReason::Clean {
                break 'rounds PpaHalt::RectifyFailure;
            }
            current = outcome.final_source;
            rewrites += 1;
        }
        PpaHalt::RoundBudget
    };

    // The gate never passed: fall back to the best functionally-correct
    // candidate by smallest normalized violation, ties to the earliest.
    let best = candidates
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            a.score
                .partial_cmp(&b.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(j))
        })
        .map(|(_, c)| c)
        .expect("at least one sweep ran");
    Ok(PpaOutcome {
        final_source: best.source,
        final_report: best.report,
        min_clock_ps: best.min_clock_ps,
        gate: best.gate,
        ppa_rounds_used: rewrites,
        reports,
        halted_by,
        synth_calls,
    })
}

/// Normalized sum of bound overshoots; 0 means all present bounds hold.
fn violation_score(report: &PpaReport, constraints: &PpaConstraints) -> f64 {
    let mut score = 0.0;
    let checks = [
        (report.clock_ps, constraints.max_clock_ps),
        (report.power_uw, constraints.max_power_uw),
        (report.area_um2, constraints.max_area_um2),
    ];
    for (measured, bound) in checks {
        if let Some(b) = bound {
            match measured {
                Some(m) if m > b => score += (m - b) / b,
                Some(_) => {}
                None => score += f64::INFINITY,
            }
        }
    }
    score
}

fn persist(dir: &Path, name: &str, content: &str) {
    let _ = std::fs::create_dir_all(dir);
    let _ = std::fs::write(dir.join(name), content);
}

fn persist_json<T: Serialize>(dir: &Path, name: &str, value: &T) {
    if let Ok(json) = serde_json::to_string_pretty(value) {
        persist(dir, name, &json);
    }
}
