//! Benchmark execution: run the pipeline over a whole dataset, score
//! it, and account for its cost.
//!
//! Designs run in a small worker pool; aggregation folds the committed
//! records in design order, so the scoreboard is deterministic no
//! matter how workers interleave. Resume is per attempt: an attempt
//! with a committed `record.json` is never redone.

mod cost;
mod dataset;
mod scoreboard;

pub use cost::{cost_report, CostError, CostReport, CostRow, DEFAULT_MACS_PER_TOKEN};
pub use dataset::{
    load_dataset, DatasetDescriptor, DatasetError, DatasetKind, DesignMeta, LoadedDataset,
};
pub use scoreboard::{percent_truncated, DesignScore, ScoreBoard};

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicI64, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::model::{DesignSpec, Milestone, PpaConstraints, RectifyConfig, RunRecord};
use crate::rectify::{run_attempt, PipelineDeps};
use crate::store::RunDir;
use crate::synth::{optimize_ppa, PpaStageConfig, StageError};

/// Which prompting method an attempt uses. The baseline is a single
/// plan-then-code turn with no repair rounds, kept only for cost
/// comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    #[default]
    MultiRoundRepair,
    PlanThenCodeBaseline,
}

/// Execution knobs for one benchmark invocation.
#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub workers: usize,
    /// Skip attempts whose record is already committed.
    pub resume: bool,
    /// Stop after executing this many attempts in this invocation,
    /// leaving the run resumable. None means run to completion.
    pub attempt_budget: Option<usize>,
    pub method: BenchMethod,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            resume: false,
            attempt_budget: None,
            method: BenchMethod::MultiRoundRepair,
        }
    }
}

/// Outcome of one benchmark invocation. `complete` is false when the
/// attempt budget interrupted the run before every attempt committed.
#[derive(Debug)]
pub struct BenchResult {
    pub scoreboard: ScoreBoard,
    pub records: Vec<RunRecord>,
    pub complete: bool,
}

/// Runs `generations_n` attempts per design over the dataset, with the
/// optional PPA stage for designs that have constraints, committing
/// each attempt's record into the run store.
///
/// `constraints_map` overrides per-design constraints from the dataset
/// metadata; designs with no (or empty) constraints skip the PPA stage
/// entirely. Worker-thread environment failures (missing tools) abort
/// the batch; per-attempt pipeline failures are recorded and never do.
pub fn run_benchmark(
    specs: &[DesignSpec],
    cfg: &RectifyConfig,
    constraints_map: &BTreeMap<String, PpaConstraints>,
    stage: &PpaStageConfig,
    deps: &PipelineDeps<'_>,
    run: &RunDir,
    options: &BenchOptions,
) -> Result<BenchResult, StageError> {
    let next_design = AtomicUsize::new(0);
    let budget = AtomicI64::new(options.attempt_budget.map(|b| b as i64).unwrap_or(i64::MAX));
    let first_error: Mutex<Option<StageError>> = Mutex::new(None);
    let workers = options.workers.max(1).min(specs.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if first_error.lock().unwrap().is_some() {
                    return;
                }
                let index = next_design.fetch_add(1, Ordering::SeqCst);
                let Some(spec) = specs.get(index) else { return };
                if let Err(e) = run_design(
                    spec,
                    cfg,
                    constraints_map,
                    stage,
                    deps,
                    run,
                    options,
                    &budget,
                ) {
                    let mut slot = first_error.lock().unwrap();
                    if slot.is_none() {
                        *slot = Some(e);
                    }
                    return;
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }

    // Deterministic aggregation: fold committed records in (design,
    // attempt) order straight from the store.
    let mut records = Vec::new();
    let mut complete = true;
    for spec in specs {
        for attempt in 0..cfg.generations_n as usize {
            match run.read_record(&spec.design_id, attempt) {
                Some(record) => records.push(record),
                None => complete = false,
            }
        }
    }
    let scoreboard = ScoreBoard::from_records(&records);
    if complete {
        run.write_scoreboard(&scoreboard).ok();
        run.set_status(crate::store::RunStatus::Complete).ok();
    }
    Ok(BenchResult {
        scoreboard,
        records,
        complete,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_design(
    spec: &DesignSpec,
    cfg: &RectifyConfig,
    constraints_map: &BTreeMap<String, PpaConstraints>,
    stage: &PpaStageConfig,
    deps: &PipelineDeps<'_>,
    run: &RunDir,
    options: &BenchOptions,
    budget: &AtomicI64,
) -> Result<(), StageError> {
    for attempt in 0..cfg.generations_n as usize {
        if options.resume && run.read_record(&spec.design_id, attempt).is_some() {
            continue;
        }
        if budget.fetch_sub(1, Ordering::SeqCst) <= 0 {
            return Ok(()); // budget exhausted: leave the rest for resume
        }
        let record = execute_attempt(
            spec,
            cfg,
            constraints_map,
            stage,
            deps,
            run,
            options,
            attempt,
        )?;
        run.write_record(&record, attempt).map_err(|e| {
            StageError::Workbench(crate::workbench::WorkbenchError::Io {
                context: e.to_string(),
                source: std::io::Error::other("store write failed"),
            })
        })?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn execute_attempt(
    spec: &DesignSpec,
    cfg: &RectifyConfig,
    constraints_map: &BTreeMap<String, PpaConstraints>,
    stage: &PpaStageConfig,
    deps: &PipelineDeps<'_>,
    run: &RunDir,
    options: &BenchOptions,
    attempt_index: usize,
) -> Result<RunRecord, StageError> {
    let attempt_dir = run.attempt_dir(&spec.design_id, attempt_index);
    if attempt_dir.exists() {
        // No committed record: the previous invocation died mid-attempt,
        // so its partial artifacts must not leak into the redo.
        let _ = std::fs::remove_dir_all(&attempt_dir);
    }

    let (effective_cfg, seed) = match options.method {
        BenchMethod::MultiRoundRepair => (
            cfg.clone(),
            deps.prompts
                .build_generation_prompt(spec, deps.few_shot)
                .expect("generation prompt renders for a valid spec"),
        ),
        BenchMethod::PlanThenCodeBaseline => (
            RectifyConfig {
                max_rounds_k: 0,
                ..cfg.clone()
            },
            deps.prompts
                .build_baseline_prompt(spec)
                .expect("baseline prompt renders for a valid spec"),
        ),
    };

    let mut attempt_run = run_attempt(
        spec,
        &effective_cfg,
        deps,
        attempt_index,
        &attempt_dir,
        seed,
    )?;
    let mut record = attempt_run.attempt.to_run_record();

    let constraints = constraints_map
        .get(&spec.design_id)
        .or(spec.ppa_constraints.as_ref())
        .cloned()
        .unwrap_or_default();
    let wants_ppa = !constraints.is_empty()
        && options.method == BenchMethod::MultiRoundRepair
        && attempt_run.attempt.milestone() == Milestone::FunctionalPass;

    if wants_ppa {
        let (Some(gateway), Some(outcome)) = (&attempt_run.gateway, &attempt_run.attempt.outcome)
        else {
            return Ok(record);
        };
        let ppa = optimize_ppa(
            outcome.final_source.clone(),
            spec,
            &constraints,
            &effective_cfg,
            deps,
            gateway,
            &mut attempt_run.conversation,
            stage,
            &attempt_dir,
        )?;
        record.reports = ppa.reports.clone();
        record.transcripts = attempt_run.conversation.messages.clone();
        record.token_usage = attempt_run.conversation.usage;
        if ppa.gate.passed() {
            record.final_verdict = Milestone::PpaPass;
        }
        let _ = std::fs::write(attempt_dir.join("final.v"), &ppa.final_source.text);
    } else if let Some(outcome) = &attempt_run.attempt.outcome {
        if record.final_verdict >= Milestone::FunctionalPass {
            let _ = std::fs::write(attempt_dir.join("final.v"), &outcome.final_source.text);
        }
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{BackendConfig, ScriptEntry};
    use crate::prompt::{FewShotBank, PromptLibrary};
    use crate::store::RunStore;
    use crate::workbench::{stub_simulator, ParserRules, Workbench};
    use std::path::{Path, PathBuf};

    const GOOD: &str = "module dut_design();\n  // ok\nendmodule\n";
    const BAD_FUNC: &str = "module dut_design();\n  // FORCE_FUNC_FAIL\nendmodule\n";
    const BAD_SYNTAX: &str = "module dut_design();\n  // FORCE_SYNTAX_FAIL\nendmodule\n";

    struct Fixture {
        _dir: tempfile::TempDir,
        root: PathBuf,
        specs: Vec<DesignSpec>,
        workbench: Workbench,
        prompts: PromptLibrary,
        few_shot: FewShotBank,
        store: RunStore,
    }

    impl Fixture {
        fn new(design_count: usize) -> Self {
            let dir = tempfile::tempdir().unwrap();
            let root = dir.path().to_path_buf();
            let sim = stub_simulator(&root.join("tools")).unwrap();
            let specs = (0..design_count)
                .map(|i| {
                    let tb = root.join(format!("design_{i}_tb.v"));
                    std::fs::write(&tb, "module tb; endmodule\n").unwrap();
                    DesignSpec {
                        design_id: format!("design_{i}"),
                        description: format!("design number {i}"),
                        module_name: "dut_design".into(),
                        ports: vec![],
                        testbench_path: tb,
                        ppa_constraints: None,
                    }
                })
                .collect();
            Fixture {
                store: RunStore::new(root.join("runs")),
                _dir: dir,
                root,
                specs,
                workbench: Workbench::new(sim, ParserRules::default()),
                prompts: PromptLibrary::builtin(),
                few_shot: FewShotBank::default(),
            }
        }

        fn script_dir(&self, per_design: &[(&str, Vec<&str>)]) -> PathBuf {
            let dir = self.root.join("scripts");
            std::fs::create_dir_all(&dir).unwrap();
            for (name, responses) in per_design {
                let entries: Vec<ScriptEntry> = responses
                    .iter()
                    .map(|r| ScriptEntry {
                        response: format!("```verilog\n{r}```"),
                        prompt_tokens: 7,
                        completion_tokens: 3,
                    })
                    .collect();
                std::fs::write(
                    dir.join(format!("{name}.json")),
                    serde_json::to_string(&entries).unwrap(),
                )
                .unwrap();
            }
            dir
        }

        fn deps<'a>(&'a self, backend: &'a BackendConfig) -> PipelineDeps<'a> {
            PipelineDeps {
                backend,
                workbench: &self.workbench,
                prompts: &self.prompts,
                few_shot: &self.few_shot,
            }
        }

        fn bench(
            &self,
            backend: &BackendConfig,
            cfg: &RectifyConfig,
            run_id: &str,
            options: &BenchOptions,
        ) -> (BenchResult, crate::store::RunDir) {
            let run = match self.store.open_run(run_id) {
                Ok(run) => run,
                Err(_) => self
                    .store
                    .create_run(
                        Some(run_id.to_string()),
                        serde_json::json!({"rectify": cfg}),
                        None,
                        Default::default(),
                    )
                    .unwrap(),
            };
            let result = run_benchmark(
                &self.specs,
                cfg,
                &BTreeMap::new(),
                &PpaStageConfig::mock_default(),
                &self.deps(backend),
                &run,
                options,
            )
            .unwrap();
            (result, run)
        }
    }

    fn two_attempt_cfg() -> RectifyConfig {
        RectifyConfig {
            generations_n: 2,
            max_rounds_k: 2,
            ..Default::default()
        }
    }

    #[test]
    fn scoreboard_counts_match_outcome_mix() {
        let fx = Fixture::new(2);
        // design_0 passes immediately; design_1 compiles but fails
        // functionally on both attempts (no repair ever lands).
        let scripts =
            fx.script_dir(&[("design_0", vec![GOOD; 3]), ("design_1", vec![BAD_FUNC; 6])]);
        let backend = BackendConfig::scripted(scripts);
        let (result, run) = fx.bench(
            &backend,
            &two_attempt_cfg(),
            "mix",
            &BenchOptions::default(),
        );

        assert!(result.complete);
        assert_eq!(result.scoreboard.attempts_total, 4);
        assert_eq!(result.scoreboard.syntax_passes, 4);
        assert_eq!(result.scoreboard.functional_passes, 2);
        assert_eq!(result.scoreboard.syntax_rate_percent(), "100.00");
        assert_eq!(result.scoreboard.functional_rate_percent(), "50.00");
        // Conservation: board recomputes from the store exactly.
        assert_eq!(
            ScoreBoard::from_records(&run.load_records()),
            result.scoreboard
        );
    }

    #[test]
    fn scripted_runs_are_deterministic_byte_for_byte() {
        let fx = Fixture::new(3);
        let scripts = fx.script_dir(&[
            ("design_0", vec![GOOD]),
            ("design_1", vec![BAD_SYNTAX, GOOD]),
            ("design_2", vec![BAD_FUNC, BAD_FUNC, BAD_FUNC]),
        ]);
        let backend = BackendConfig::scripted(scripts);
        let cfg = two_attempt_cfg();
        let (_r1, run1) = fx.bench(&backend, &cfg, "det_a", &BenchOptions::default());
        let (_r2, run2) = fx.bench(&backend, &cfg, "det_b", &BenchOptions::default());
        let a = std::fs::read(run1.scoreboard_path()).unwrap();
        let b = std::fs::read(run2.scoreboard_path()).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn workers_do_not_change_the_scoreboard() {
        let fx = Fixture::new(4);
        let scripts = fx.script_dir(&[
            ("design_0", vec![GOOD]),
            ("design_1", vec![BAD_SYNTAX, GOOD]),
            ("design_2", vec![BAD_FUNC; 4]),
            ("design_3", vec![GOOD]),
        ]);
        let backend = BackendConfig::scripted(scripts);
        let cfg = two_attempt_cfg();
        let (serial, _) = fx.bench(&backend, &cfg, "w1", &BenchOptions::default());
        let options = BenchOptions {
            workers: 4,
            ..Default::default()
        };
        let (parallel, _) = fx.bench(&backend, &cfg, "w4", &options);
        assert_eq!(serial.scoreboard, parallel.scoreboard);
    }

    #[test]
    fn budget_interrupts_and_resume_completes_identically() {
        let fx = Fixture::new(3);
        let scripts = fx.script_dir(&[
            ("design_0", vec![GOOD]),
            ("design_1", vec![BAD_SYNTAX, GOOD]),
            ("design_2", vec![BAD_FUNC; 4]),
        ]);
        let backend = BackendConfig::scripted(scripts);
        let cfg = two_attempt_cfg();

        // Uninterrupted reference run.
        let (full, full_run) = fx.bench(&backend, &cfg, "full", &BenchOptions::default());
        assert!(full.complete);

        // Interrupted after 2 attempts, then resumed.
        let interrupted = BenchOptions {
            attempt_budget: Some(2),
            ..Default::default()
        };
        let (partial, _) = fx.bench(&backend, &cfg, "resumed", &interrupted);
        assert!(!partial.complete);
        let resume = BenchOptions {
            resume: true,
            ..Default::default()
        };
        let (resumed, resumed_run) = fx.bench(&backend, &cfg, "resumed", &resume);
        assert!(resumed.complete);
        assert_eq!(resumed.scoreboard, full.scoreboard);
        assert_eq!(
            std::fs::read(full_run.scoreboard_path()).unwrap(),
            std::fs::read(resumed_run.scoreboard_path()).unwrap(),
        );
    }

    #[test]
    fn resume_redoes_partial_attempts_and_keeps_committed_bytes() {
        let fx = Fixture::new(1);
        let scripts = fx.script_dir(&[("design_0", vec![GOOD])]);
        let backend = BackendConfig::scripted(scripts);
        let cfg = RectifyConfig {
            generations_n: 2,
            ..Default::default()
        };
        let (_, run) = fx.bench(
            &backend,
            &cfg,
            "partial",
            &BenchOptions {
                attempt_budget: Some(1),
                ..Default::default()
            },
        );
        // attempt_0 committed, attempt_1 never ran. Fake a partial
        // attempt_1 left behind by a crash.
        let committed = std::fs::read(run.record_path("design_0", 0)).unwrap();
        let partial_dir = run.attempt_dir("design_0", 1);
        std::fs::create_dir_all(partial_dir.join("round_0")).unwrap();
        std::fs::write(partial_dir.join("round_0/source.v"), "stale garbage").unwrap();

        let (resumed, _) = fx.bench(
            &backend,
            &cfg,
            "partial",
            &BenchOptions {
                resume: true,
                ..Default::default()
            },
        );
        assert!(resumed.complete);
        // The committed attempt is byte-identical; the partial one was
        // wiped and redone.
        assert_eq!(
            std::fs::read(run.record_path("design_0", 0)).unwrap(),
            committed
        );
        let redone = std::fs::read_to_string(partial_dir.join("round_0/source.v")).unwrap();
        assert_eq!(redone, GOOD);
    }

    #[test]
    fn ppa_stage_runs_only_with_constraints() {
        let fx = Fixture::new(1);
        // Same script either way: one clean generation.
        let scripts = fx.script_dir(&[("design_0", vec![GOOD])]);
        let backend = BackendConfig::scripted(scripts);
        let cfg = RectifyConfig {
            generations_n: 1,
            ..Default::default()
        };

        // No constraints anywhere: identical to a correctness-only run.
        let (plain, _) = fx.bench(&backend, &cfg, "noppa", &BenchOptions::default());
        assert_eq!(plain.records[0].final_verdict, Milestone::FunctionalPass);
        assert!(plain.records[0].reports.is_empty());

        // A satisfiable constraint upgrades the milestone.
        let run = fx
            .store
            .create_run(
                Some("ppa".into()),
                serde_json::json!({}),
                None,
                Default::default(),
            )
            .unwrap();
        let mut constraints = BTreeMap::new();
        constraints.insert(
            "design_0".to_string(),
            PpaConstraints {
                max_clock_ps: Some(400.0),
                ..Default::default()
            },
        );
        let result = run_benchmark(
            &fx.specs,
            &cfg,
            &constraints,
            &PpaStageConfig::mock_default(),
            &fx.deps(&backend),
            &run,
            &BenchOptions::default(),
        )
        .unwrap();
        assert_eq!(result.records[0].final_verdict, Milestone::PpaPass);
        assert!(!result.records[0].reports.is_empty());
        assert_eq!(result.scoreboard.ppa_passes, 1);
    }

    #[test]
    fn baseline_method_is_single_turn() {
        let fx = Fixture::new(1);
        let scripts = fx.script_dir(&[("design_0", vec![BAD_SYNTAX, GOOD])]);
        let backend = BackendConfig::scripted(scripts);
        let cfg = RectifyConfig {
            generations_n: 1,
            max_rounds_k: 4,
            ..Default::default()
        };
        let options = BenchOptions {
            method: BenchMethod::PlanThenCodeBaseline,
            ..Default::default()
        };
        let (result, _) = fx.bench(&backend, &cfg, "base", &options);
        let record = &result.records[0];
        // One user turn, one reply, no repair rounds even though the
        // script had a fix ready.
        assert_eq!(record.transcripts.len(), 2);
        assert_eq!(record.rounds.len(), 1);
        assert_eq!(record.final_verdict, Milestone::Fail);
    }

    fn read_all(dir: &Path, acc: &mut Vec<u8>) {
        let Ok(entries) = std::fs::read_dir(dir) else {
            return;
        };
        let mut paths: Vec<PathBuf> = entries.flatten().map(|e| e.path()).collect();
        paths.sort();
        for path in paths {
            if path.is_dir() {
                read_all(&path, acc);
            } else if let Ok(bytes) = std::fs::read(&path) {
                acc.extend(bytes);
            }
        }
    }

    #[test]
    fn api_key_value_never_reaches_the_store() {
        let fx = Fixture::new(1);
        let scripts = fx.script_dir(&[("design_0", vec![GOOD])]);
        let mut backend = BackendConfig::scripted(scripts);
        backend.api_key_env = Some("VERIFORGE_BENCH_TEST_KEY".into());
        let secret = "sk-super-secret-value-9b1c";
        std::env::set_var("VERIFORGE_BENCH_TEST_KEY", secret);
        let cfg = RectifyConfig {
            generations_n: 1,
            ..Default::default()
        };
        let (_, run) = fx.bench(&backend, &cfg, "secret", &BenchOptions::default());
        let mut store_bytes = Vec::new();
        read_all(run.path(), &mut store_bytes);
        assert!(!store_bytes.is_empty());
        let haystack = String::from_utf8_lossy(&store_bytes);
        assert!(!haystack.contains(secret));
        std::env::remove_var("VERIFORGE_BENCH_TEST_KEY");
    }
}
