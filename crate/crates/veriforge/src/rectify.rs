//! The bounded multi-round repair loop.
//!
//! Each round feeds the previous source and its diagnostics back to the
//! model as a repair prompt, extracts the rewritten module, and
//! re-checks it. The loop halts when a check comes back clean or after
//! K repair rounds, whichever is first, and always returns the full
//! trace.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::gateway::{BackendConfig, Gateway, GatewayError};
use crate::model::{
    ChatMessage, DesignSpec, DiagnosticSet, HaltReason, Milestone, RectifyConfig, Role, RunRecord,
    TokenUsage, VerilogSource,
};
use crate::prompt::{FewShotBank, PromptLibrary};
use crate::workbench::{extract_verilog, Workbench, WorkbenchError};

/// A strictly sequential conversation with accumulated token usage.
#[derive(Debug, Clone, Default)]
pub struct Conversation {
    pub messages: Vec<ChatMessage>,
    pub usage: TokenUsage,
}

impl Conversation {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        Self {
            messages,
            usage: TokenUsage::default(),
        }
    }

    pub fn push(&mut self, message: ChatMessage) {
        self.messages.push(message);
    }

    /// One backend call: sends the history, appends the reply, and adds
    /// its usage to the running total.
    pub fn complete(&mut self, gateway: &Gateway) -> Result<ChatMessage, GatewayError> {
        let (reply, usage) = gateway.complete(&self.messages)?;
        self.usage += usage;
        self.messages.push(reply.clone());
        Ok(reply)
    }
}

/// Everything a pipeline run needs besides the per-attempt gateway.
pub struct PipelineDeps<'a> {
    pub backend: &'a BackendConfig,
    pub workbench: &'a Workbench,
    pub prompts: &'a PromptLibrary,
    pub few_shot: &'a FewShotBank,
}

/// Result of one repair loop: the last source and its diagnostics, how
/// the loop halted, and the per-round trace (initial check included,
/// so `round_log.len() == rounds_used + 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectifyOutcome {
    pub final_source: VerilogSource,
    pub final_errors: DiagnosticSet,
    pub rounds_used: u32,
    pub halted_by: HaltReason,
    pub round_log: Vec<(VerilogSource, DiagnosticSet)>,
    /// Backend error text or the unparseable raw response, when the
    /// loop ended in a failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_detail: Option<String>,
}

/// Runs the repair loop on an already-generated source.
///
/// Invokes the workbench at most K+1 times and the gateway at most K
/// times. Backend failures and extraction failures terminate the
/// attempt with the last good state; environment problems (missing
/// simulator, unwritable workdir) propagate as errors.
pub fn rectify(
    initial: VerilogSource,
    spec: &DesignSpec,
    cfg: &RectifyConfig,
    deps: &PipelineDeps<'_>,
    gateway: &Gateway,
    conversation: &mut Conversation,
    attempt_dir: &Path,
) -> Result<RectifyOutcome, WorkbenchError> {
    debug_assert_eq!(initial.round, 0, "rectify starts from a round-0 source");

    let mut current = initial;
    let mut current_errors = checked_round(deps.workbench, &current, spec, attempt_dir, 0)?;
    let mut round_log = vec![(current.clone(), current_errors.clone())];
    let mut rounds_used: u32 = 0;
    let mut failure_detail = None;

    let halted_by = loop {
        if current_errors.is_clean() {
            break HaltReason::Clean;
        }
        if rounds_used >= cfg.max_rounds_k {
            break HaltReason::RoundLimit;
        }
        let round = rounds_used + 1;
        let round_dir = attempt_dir.join(format!("round_{round}"));

        let prompt = deps
            .prompts
            .build_repair_prompt(&current, &current_errors)
            .expect("non-clean diagnostics build a repair prompt");
        persist(&round_dir, "prompt.txt", &prompt.content);
        conversation.push(prompt);

        let response = match conversation.complete(gateway) {
            Ok(reply) => reply,
            Err(e) => {
                failure_detail = Some(e.to_string());
                break HaltReason::BackendFailure;
            }
        };
        persist(&round_dir, "response.txt", &response.content);

        let text = match extract_verilog(&response.content) {
            Ok(text) => text,
            Err(e) => {
                // The raw response is already persisted above; no
                // simulator call is spent on this round.
                failure_detail = Some(e.response);
                break HaltReason::ExtractionFailure;
            }
        };

        let next = current.child(text);
        let next_errors = checked_round(deps.workbench, &next, spec, attempt_dir, round)?;
        round_log.push((next.clone(), next_errors.clone()));
        current = next;
        current_errors = next_errors;
        rounds_used = round;
    };

    Ok(RectifyOutcome {
        final_source: current,
        final_errors: current_errors,
        rounds_used,
        halted_by,
        round_log,
        failure_detail,
    })
}

/// Writes the round's source, runs the check in a per-round sim
/// directory, persists the diagnostics, and deletes the sim scratch
/// when the check came back clean (kept for debugging otherwise).
fn checked_round(
    workbench: &Workbench,
    source: &VerilogSource,
    spec: &DesignSpec,
    attempt_dir: &Path,
    round: u32,
) -> Result<DiagnosticSet, WorkbenchError> {
    let round_dir = attempt_dir.join(format!("round_{round}"));
    persist(&round_dir, "source.v", &source.text);
    let sim_dir = round_dir.join("sim");
    let errors = workbench.check(source, spec, &sim_dir)?;
    persist(
        &round_dir,
        "diagnostics.json",
        &serde_json::to_string_pretty(&errors).expect("diagnostics serialize"),
    );
    if errors.is_clean() {
        let _ = std::fs::remove_dir_all(&sim_dir);
    }
    Ok(errors)
}

fn persist(dir: &Path, name: &str, content: &str) {
    // Round artifacts are best-effort audit data; the outcome itself
    // does not depend on them.
    let _ = std::fs::create_dir_all(dir);
    let _ = std::fs::write(dir.join(name), content);
}

/// One generation attempt: the seeded conversation, the repair loop
/// outcome (absent when the very first response had no extractable
/// code), and the attempt-level audit data.
#[derive(Debug, Clone)]
pub struct GenerationAttempt {
    pub attempt_id: String,
    pub attempt_index: usize,
    pub outcome: Option<RectifyOutcome>,
    pub halted_by: HaltReason,
    pub transcript: Vec<ChatMessage>,
    pub token_usage: TokenUsage,
    pub failure_detail: Option<String>,
}

impl GenerationAttempt {
    /// Correctness milestone this attempt reached (PPA upgrades happen
    /// in the synthesis stage).
    pub fn milestone(&self) -> Milestone {
        match &self.outcome {
            Some(outcome) => Milestone::from_verdict(outcome.final_errors.verdict),
            None => Milestone::Fail,
        }
    }

    pub fn to_run_record(&self) -> RunRecord {
        let rounds = self
            .outcome
            .as_ref()
            .map(|o| o.round_log.iter().map(|(_, e)| e.clone()).collect())
            .unwrap_or_default();
        RunRecord {
            attempt_id: self.attempt_id.clone(),
            design_id: self
                .attempt_id
                .split('/')
                .next()
                .unwrap_or_default()
                .to_string(),
            rounds,
            final_verdict: self.milestone(),
            halted_by: self.halted_by,
            transcripts: self.transcript.clone(),
            token_usage: self.token_usage,
            reports: Vec::new(),
        }
    }
}

/// A finished attempt plus the live conversation state, so a later
/// stage (PPA optimization) can keep talking to the same backend.
pub struct AttemptRun {
    pub attempt: GenerationAttempt,
    pub gateway: Option<Gateway>,
    pub conversation: Conversation,
}

/// Runs `generations_n` independent attempts for one design, each with
/// a fresh conversation seeded by the generation prompt. Attempts never
/// share state and per-attempt failures never abort the batch.
pub fn generate_and_rectify(
    spec: &DesignSpec,
    cfg: &RectifyConfig,
    deps: &PipelineDeps<'_>,
    design_dir: &Path,
) -> Result<Vec<GenerationAttempt>, WorkbenchError> {
    let mut attempts = Vec::with_capacity(cfg.generations_n as usize);
    for index in 0..cfg.generations_n as usize {
        let attempt_dir = design_dir.join(format!("attempt_{index}"));
        let seed = deps
            .prompts
            .build_generation_prompt(spec, deps.few_shot)
            .expect("generation prompt renders for a valid spec");
        attempts.push(run_attempt(spec, cfg, deps, index, &attempt_dir, seed)?.attempt);
    }
    Ok(attempts)
}

/// One seeded attempt: send the seed conversation, extract the initial
/// source from the reply, then hand off to [`rectify`].
pub fn run_attempt(
    spec: &DesignSpec,
    cfg: &RectifyConfig,
    deps: &PipelineDeps<'_>,
    attempt_index: usize,
    attempt_dir: &Path,
    seed: Vec<ChatMessage>,
) -> Result<AttemptRun, WorkbenchError> {
    let attempt_id = format!("{}/attempt_{attempt_index}", spec.design_id);
    let round0 = attempt_dir.join("round_0");

    let backend = match deps.backend.for_attempt(&spec.design_id, attempt_index) {
        Ok(backend) => backend,
        Err(e) => {
            return Ok(failed_attempt(
                attempt_id,
                attempt_index,
                None,
                Conversation::default(),
                e.to_string(),
            ))
        }
    };
    let mut backend = backend;
    backend.temperature = cfg.temperature;
    backend.max_context_tokens = cfg.context_length as u64;
    let gateway = match Gateway::new(backend) {
        Ok(gateway) => gateway,
        Err(e) => {
            return Ok(failed_attempt(
                attempt_id,
                attempt_index,
                None,
                Conversation::default(),
                e.to_string(),
            ))
        }
    };

    persist(&round0, "prompt.txt", &render_transcript(&seed));
    let mut conversation = Conversation::new(seed);

    let response = match conversation.complete(&gateway) {
        Ok(reply) => reply,
        Err(e) => {
            let detail = e.to_string();
            return Ok(failed_attempt(
                attempt_id,
                attempt_index,
                Some(gateway),
                conversation,
                detail,
            ));
        }
    };
    persist(&round0, "response.txt", &response.content);

    let initial = match extract_verilog(&response.content) {
        Ok(text) => VerilogSource::initial(text, &attempt_id),
        Err(e) => {
            return Ok(AttemptRun {
                attempt: GenerationAttempt {
                    attempt_id,
                    attempt_index,
                    outcome: None,
                    halted_by: HaltReason::ExtractionFailure,
                    transcript: conversation.messages.clone(),
                    token_usage: conversation.usage,
                    failure_detail: Some(e.response),
                },
                gateway: Some(gateway),
                conversation,
            })
        }
    };

    let outcome = rectify(
        initial,
        spec,
        cfg,
        deps,
        &gateway,
        &mut conversation,
        attempt_dir,
    )?;
    Ok(AttemptRun {
        attempt: GenerationAttempt {
            attempt_id,
            attempt_index,
            halted_by: outcome.halted_by,
            failure_detail: outcome.failure_detail.clone(),
            outcome: Some(outcome),
            transcript: conversation.messages.clone(),
            token_usage: conversation.usage,
        },
        gateway: Some(gateway),
        conversation,
    })
}

fn failed_attempt(
    attempt_id: String,
    attempt_index: usize,
    gateway: Option<Gateway>,
    conversation: Conversation,
    detail: String,
) -> AttemptRun {
    AttemptRun {
        attempt: GenerationAttempt {
            attempt_id,
            attempt_index,
            outcome: None,
            halted_by: HaltReason::BackendFailure,
            transcript: conversation.messages.clone(),
            token_usage: conversation.usage,
            failure_detail: Some(detail),
        },
        gateway,
        conversation,
    }
}

/// Human-readable rendering of a message sequence for the audit files.
pub fn render_transcript(messages: &[ChatMessage]) -> String {
    let mut out = String::new();
    for m in messages {
        let role = match m.role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        out.push_str(&format!("[{role}]\n{}\n\n", m.content));
    }
    out
}

/// Absolute path of an attempt's round source file, as written by
/// [`rectify`].
pub fn round_source_path(attempt_dir: &Path, round: u32) -> PathBuf {
    attempt_dir.join(format!("round_{round}")).join("source.v")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptEntry;
    use crate::model::Verdict;
    use crate::workbench::{stub_simulator, ParserRules};

    const GOOD: &str = "module adder_8bit();\n  // fine\nendmodule\n";
    const BAD_SYNTAX: &str = "module adder_8bit();\n  wire x // FORCE_SYNTAX_FAIL\nendmodule\n";
    const BAD_FUNC: &str = "module adder_8bit();\n  // FORCE_FUNC_FAIL\nendmodule\n";

    fn fenced(code: &str) -> String {
        format!("Here is the fix:\n```verilog\n{code}```\n")
    }

    fn write_script(path: &Path, responses: &[&str]) {
        let entries: Vec<ScriptEntry> = responses
            .iter()
            .map(|r| ScriptEntry {
                response: r.to_string(),
                prompt_tokens: 100,
                completion_tokens: 50,
            })
            .collect();
        std::fs::write(path, serde_json::to_string(&entries).unwrap()).unwrap();
    }

    struct Fixture {
        _dir: tempfile::TempDir,
        root: PathBuf,
        spec: DesignSpec,
        workbench: Workbench,
        prompts: PromptLibrary,
        few_shot: FewShotBank,
    }

    impl Fixture {
        fn new() -> Self {
            let dir = tempfile::tempdir().unwrap();
            let root = dir.path().to_path_buf();
            let tb = root.join("adder_8bit_tb.v");
            std::fs::write(&tb, "module tb; endmodule\n").unwrap();
            let sim = stub_simulator(&root.join("tools")).unwrap();
            Fixture {
                _dir: dir,
                root,
                spec: DesignSpec {
                    design_id: "adder_8bit".into(),
                    description: "adds".into(),
                    module_name: "adder_8bit".into(),
                    ports: vec![],
                    testbench_path: tb,
                    ppa_constraints: None,
                },
                workbench: Workbench::new(sim, ParserRules::default()),
                prompts: PromptLibrary::builtin(),
                few_shot: FewShotBank::default(),
            }
        }

        fn deps<'a>(&'a self, backend: &'a BackendConfig) -> PipelineDeps<'a> {
            PipelineDeps {
                backend,
                workbench: &self.workbench,
                prompts: &self.prompts,
                few_shot: &self.few_shot,
            }
        }

        fn rectify_with_script(&self, initial: &str, responses: &[&str], k: u32) -> RectifyOutcome {
            let script = self.root.join("script.json");
            write_script(&script, responses);
            let backend = BackendConfig::scripted(&script);
            let deps = self.deps(&backend);
            let gateway = Gateway::new(backend.clone()).unwrap();
            let cfg = RectifyConfig {
                max_rounds_k: k,
                ..Default::default()
            };
            let mut conversation = Conversation::new(vec![ChatMessage::user("seed")]);
            rectify(
                VerilogSource::initial(initial, "adder_8bit/attempt_0"),
                &self.spec,
                &cfg,
                &deps,
                &gateway,
                &mut conversation,
                &self.root.join("attempt_0"),
            )
            .unwrap()
        }
    }

    #[test]
    fn already_clean_halts_in_zero_rounds() {
        let fx = Fixture::new();
        let outcome = fx.rectify_with_script(GOOD, &[], 4);
        assert_eq!(outcome.rounds_used, 0);
        assert_eq!(outcome.halted_by, HaltReason::Clean);
        assert_eq!(outcome.round_log.len(), 1);
    }

    #[test]
    fn converges_on_third_repair() {
        let fx = Fixture::new();
        let responses = [fenced(BAD_SYNTAX), fenced(BAD_FUNC), fenced(GOOD)];
        let refs: Vec<&str> = responses.iter().map(|s| s.as_str()).collect();
        let outcome = fx.rectify_with_script(BAD_SYNTAX, &refs, 4);
        assert_eq!(outcome.rounds_used, 3);
        assert_eq!(outcome.halted_by, HaltReason::Clean);
        assert_eq!(outcome.round_log.len(), 4);
        assert_eq!(outcome.final_errors.verdict, Verdict::Clean);
    }

    #[test]
    fn round_limit_exhaustion_at_k() {
        let fx = Fixture::new();
        let bad = fenced(BAD_SYNTAX);
        let refs = vec![bad.as_str(); 8];
        let outcome = fx.rectify_with_script(BAD_SYNTAX, &refs, 4);
        assert_eq!(outcome.rounds_used, 4);
        assert_eq!(outcome.halted_by, HaltReason::RoundLimit);
        assert_eq!(outcome.round_log.len(), 5);
        assert_ne!(outcome.final_errors.verdict, Verdict::Clean);
    }

    #[test]
    fn extraction_failure_terminates_attempt() {
        let fx = Fixture::new();
        let outcome = fx.rectify_with_script(BAD_SYNTAX, &["I cannot produce code."], 4);
        assert_eq!(outcome.halted_by, HaltReason::ExtractionFailure);
        assert_eq!(outcome.rounds_used, 0);
        assert_eq!(outcome.round_log.len(), 1);
        assert!(outcome
            .failure_detail
            .as_deref()
            .unwrap()
            .contains("cannot produce"));
    }

    #[test]
    fn backend_exhaustion_is_backend_failure_with_last_good_state() {
        let fx = Fixture::new();
        // Script runs dry after one (still broken) repair.
        let one = fenced(BAD_FUNC);
        let outcome = fx.rectify_with_script(BAD_SYNTAX, &[one.as_str()], 4);
        assert_eq!(outcome.halted_by, HaltReason::BackendFailure);
        assert_eq!(outcome.rounds_used, 1);
        assert_eq!(outcome.final_errors.verdict, Verdict::FunctionalFail);
    }

    #[test]
    fn round_artifacts_are_persisted() {
        let fx = Fixture::new();
        let responses = [fenced(BAD_FUNC), fenced(GOOD)];
        let refs: Vec<&str> = responses.iter().map(|s| s.as_str()).collect();
        let outcome = fx.rectify_with_script(BAD_SYNTAX, &refs, 4);
        assert_eq!(outcome.rounds_used, 2);
        let attempt = fx.root.join("attempt_0");
        for round in 0..=2 {
            assert!(
                round_source_path(&attempt, round).is_file(),
                "round {round}"
            );
            assert!(attempt
                .join(format!("round_{round}/diagnostics.json"))
                .is_file());
        }
        for round in 1..=2 {
            assert!(attempt.join(format!("round_{round}/prompt.txt")).is_file());
            assert!(attempt
                .join(format!("round_{round}/response.txt"))
                .is_file());
        }
        // Failed rounds keep their sim scratch, clean rounds drop it.
        assert!(attempt.join("round_0/sim").is_dir());
        assert!(attempt.join("round_1/sim").is_dir());
        assert!(!attempt.join("round_2/sim").exists());
    }

    #[test]
    fn trace_is_replayable() {
        let fx = Fixture::new();
        let responses = [fenced(BAD_FUNC), fenced(GOOD)];
        let refs: Vec<&str> = responses.iter().map(|s| s.as_str()).collect();
        let outcome = fx.rectify_with_script(BAD_SYNTAX, &refs, 4);
        for (i, (source, errors)) in outcome.round_log.iter().enumerate() {
            let replay = fx
                .workbench
                .check(source, &fx.spec, &fx.root.join(format!("replay_{i}")))
                .unwrap();
            assert_eq!(&replay, errors, "round {i}");
        }
    }

    #[test]
    fn generate_and_rectify_runs_n_independent_attempts() {
        let fx = Fixture::new();
        // Attempt-keyed scripts: attempt 0 converges, attempt 1 exhausts K.
        let scripts = fx.root.join("scripts");
        std::fs::create_dir_all(&scripts).unwrap();
        let good = fenced(GOOD);
        let bad = fenced(BAD_SYNTAX);
        write_script(
            &scripts.join("adder_8bit__attempt_0.json"),
            &[bad.as_str(), good.as_str()],
        );
        write_script(
            &scripts.join("adder_8bit__attempt_1.json"),
            &[bad.as_str(); 6],
        );
        let backend = BackendConfig::scripted(&scripts);
        let deps = fx.deps(&backend);
        let cfg = RectifyConfig {
            generations_n: 2,
            max_rounds_k: 4,
            ..Default::default()
        };
        let attempts =
            generate_and_rectify(&fx.spec, &cfg, &deps, &fx.root.join("designs/adder_8bit"))
                .unwrap();
        assert_eq!(attempts.len(), 2);
        assert_eq!(attempts[0].halted_by, HaltReason::Clean);
        assert_eq!(attempts[0].milestone(), Milestone::FunctionalPass);
        assert_eq!(attempts[1].halted_by, HaltReason::RoundLimit);
        assert_eq!(attempts[1].milestone(), Milestone::Fail);
        // Usage equals the sum over the attempt's completions.
        assert_eq!(attempts[0].token_usage, TokenUsage::new(200, 100));
    }

    #[test]
    fn attempt_order_permutation_permutes_outcomes() {
        let fx = Fixture::new();
        let scripts = fx.root.join("perm_scripts");
        std::fs::create_dir_all(&scripts).unwrap();
        let good = fenced(GOOD);
        let bad = fenced(BAD_FUNC);
        write_script(
            &scripts.join("adder_8bit__attempt_0.json"),
            &[good.as_str()],
        );
        write_script(
            &scripts.join("adder_8bit__attempt_1.json"),
            &[bad.as_str(), good.as_str()],
        );
        let backend = BackendConfig::scripted(&scripts);
        let deps = fx.deps(&backend);
        let cfg = RectifyConfig::default();

        // Forward order, then the same attempts executed in reverse:
        // each attempt's outcome depends only on its own key.
        let seed = || vec![ChatMessage::user("seed")];
        let forward: Vec<_> = [0usize, 1]
            .iter()
            .map(|&i| {
                run_attempt(
                    &fx.spec,
                    &cfg,
                    &deps,
                    i,
                    &fx.root.join(format!("fwd_{i}")),
                    seed(),
                )
                .unwrap()
                .attempt
            })
            .collect();
        let reversed: Vec<_> = [1usize, 0]
            .iter()
            .map(|&i| {
                run_attempt(
                    &fx.spec,
                    &cfg,
                    &deps,
                    i,
                    &fx.root.join(format!("rev_{i}")),
                    seed(),
                )
                .unwrap()
                .attempt
            })
            .collect();
        assert_eq!(forward[0].outcome, reversed[1].outcome);
        assert_eq!(forward[1].outcome, reversed[0].outcome);
        assert_eq!(forward[0].token_usage, reversed[1].token_usage);
    }

    #[test]
    fn code_free_first_response_is_extraction_failure_not_crash() {
        let fx = Fixture::new();
        let script = fx.root.join("refusal.json");
        write_script(&script, &["Sorry, I can't."]);
        let backend = BackendConfig::scripted(&script);
        let deps = fx.deps(&backend);
        let cfg = RectifyConfig {
            generations_n: 1,
            ..Default::default()
        };
        let attempts =
            generate_and_rectify(&fx.spec, &cfg, &deps, &fx.root.join("designs/x")).unwrap();
        assert_eq!(attempts[0].halted_by, HaltReason::ExtractionFailure);
        assert!(attempts[0].outcome.is_none());
        assert_eq!(attempts[0].milestone(), Milestone::Fail);
        // The raw response is retained for the audit log.
        assert!(attempts[0]
            .failure_detail
            .as_deref()
            .unwrap()
            .contains("Sorry"));
    }
}
