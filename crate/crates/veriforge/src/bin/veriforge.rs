//! Command-line surface over the pipeline library. Subcommands map onto
//! the library operations; all heavy lifting lives behind them.
//!
//! Exit codes: 0 success (requested milestone met), 1 pipeline finished
//! but the milestone or validation failed, 2 configuration/environment
//! errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// stdout writes that ignore a closed pipe (`veriforge report | head`
/// must not panic).
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

use veriforge::bench::{
    cost_report, load_dataset, BenchMethod, BenchOptions, DatasetDescriptor, ScoreBoard,
};
use veriforge::config::Config;
use veriforge::model::{Milestone, VerilogSource};
use veriforge::prompt::{FewShotBank, PromptLibrary};
use veriforge::rectify::PipelineDeps;
use veriforge::store::{RunStatus, RunStore};
use veriforge::synth::sweep_min_clock;
use veriforge::workbench::Workbench;

#[derive(Parser)]
#[command(
    name = "veriforge",
    version,
    about = "Generate, repair, and PPA-optimize Verilog with a text-generation backend"
)]
struct Cli {
    /// Config file (TOML). Environment (VERIFORGE_*) and flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run store root directory.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Backend kind override: http_chat or scripted.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Worker pool width for benchmarks.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (and repair) one design, optionally through the PPA stage.
    Generate(GenerateArgs),
    /// Run a whole dataset and score it.
    Bench(BenchArgs),
    /// Find the fastest feasible clock for an existing Verilog file.
    Sweep(SweepArgs),
    /// Re-render the scoreboard (and cost tables) of a stored run.
    Report(ReportArgs),
    /// Lint the config, a dataset, or a stored run.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Design directory (description/testbench/meta) or a description
    /// text file.
    design: PathBuf,
    /// Testbench path (required when DESIGN is a bare description file).
    #[arg(long)]
    testbench: Option<PathBuf>,
    /// Module name (inferred from the description when omitted).
    #[arg(long)]
    module_name: Option<String>,
    /// Milestone required for exit code 0.
    #[arg(long, default_value = "functional")]
    require: String,
    /// Attempts to run (defaults to the configured generations count).
    #[arg(long)]
    attempts: Option<u32>,
    /// Clock bound in ps (enables the PPA stage).
    #[arg(long)]
    max_clock_ps: Option<f64>,
    /// Power bound in uW.
    #[arg(long)]
    max_power_uw: Option<f64>,
    /// Area bound in um^2.
    #[arg(long)]
    max_area_um2: Option<f64>,
    /// Pin the run id (otherwise timestamp + random suffix).
    #[arg(long)]
    run_id: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset name from the config, a design-dirs root, or a .jsonl file.
    #[arg(long)]
    dataset: String,
    /// Resume this run id (or the latest run when given without value).
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    resume: Option<String>,
    /// Skip malformed dataset entries instead of failing fast.
    #[arg(long)]
    skip_bad: bool,
    /// Use the single-turn plan-then-code baseline method.
    #[arg(long)]
    baseline: bool,
    /// Stop after this many attempts (resume later).
    #[arg(long)]
    attempt_budget: Option<usize>,
    /// Pin the run id.
    #[arg(long)]
    run_id: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Verilog source file to synthesize.
    design: PathBuf,
    #[arg(long)]
    lo_ps: Option<f64>,
    #[arg(long)]
    hi_ps: Option<f64>,
    #[arg(long)]
    resolution_ps: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run id to render (defaults to the latest run in the store).
    run_id: Option<String>,
    /// Second run id to compare token costs against (the baseline).
    #[arg(long)]
    baseline_run: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Validate a stored run directory.
    #[arg(long)]
    run: Option<String>,
    /// Validate a dataset (config name or path).
    #[arg(long)]
    dataset: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

/// Environment/config failures become `Err` (exit 2); domain outcomes
/// choose their own code.
fn run(cli: Cli) -> Result<ExitCode, String> {
    let mut config = Config::load(cli.config.as_deref()).map_err(|e| e.to_string())?;
    if let Some(store) = cli.store {
        config.store_root = store;
    }
    if let Some(kind) = &cli.backend {
        config.backend.backend_kind = match kind.as_str() {
            "http_chat" => veriforge::BackendKind::HttpChat,
            "scripted" => veriforge::BackendKind::Scripted,
            other => return Err(format!("unknown backend kind {other:?}")),
        };
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }

    match cli.command {
        Command::Generate(args) => cmd_generate(config, args),
        Command::Bench(args) => cmd_bench(config, args),
        Command::Sweep(args) => cmd_sweep(config, args),
        Command::Report(args) => cmd_report(config, args),
        Command::Validate(args) => cmd_validate(config, args),
    }
}

struct Toolbox {
    workbench: Workbench,
    prompts: PromptLibrary,
    few_shot: FewShotBank,
}

fn toolbox(config: &Config, rules_id: Option<&str>) -> Result<Toolbox, String> {
    let rules = config
        .rules_for(rules_id)
        .map_err(|e| e.to_string())?
        .compile()
        .map_err(|e| format!("parser rules: {e}"))?;
    let workbench = Workbench::new(config.simulator.clone(), rules);
    let mut prompts = match &config.prompts_dir {
        Some(dir) => PromptLibrary::load_dir(dir).map_err(|e| e.to_string())?,
        None => PromptLibrary::builtin(),
    };
    prompts.icl_limit = config.icl_limit;
    if let Some(ranking) = &config.strategy_ranking {
        prompts.set_ranking(ranking.clone());
    }
    let few_shot = match &config.few_shot_path {
        Some(path) => FewShotBank::load(path).map_err(|e| e.to_string())?,
        None => FewShotBank::builtin(),
    }
    .with_shots(config.shots);
    Ok(Toolbox {
        workbench,
        prompts,
        few_shot,
    })
}

fn tool_versions(workbench: &Workbench) -> BTreeMap<String, String> {
    let mut versions = BTreeMap::new();
    if let Some(v) = workbench.probe_version() {
        versions.insert("simulator".to_string(), v);
    }
    versions
}

fn cmd_generate(config: Config, args: GenerateArgs) -> Result<ExitCode, String> {
    let required: Milestone = args.require.parse()?;
    let mut config = config;
    if let Some(attempts) = args.attempts {
        config.rectify.generations_n = attempts;
    }

    // A design directory uses the dataset layout; a bare file is the
    // description and needs an explicit testbench.
    let spec = if args.design.is_dir() {
        let desc = DatasetDescriptor::design_dirs(args.design.parent().unwrap_or(Path::new(".")));
        let scratch = std::env::temp_dir();
        let name = args
            .design
            .file_name()
            .unwrap()
            .to_string_lossy()
            .to_string();
        let loaded = load_dataset(&desc, &scratch, true).map_err(|e| e.to_string())?;
        loaded
            .specs
            .into_iter()
            .find(|s| s.design_id == name)
            .ok_or_else(|| format!("design dir {} did not load", args.design.display()))?
    } else {
        let description = std::fs::read_to_string(&args.design)
            .map_err(|e| format!("{}: {e}", args.design.display()))?;
        let testbench_path = args
            .testbench
            .clone()
            .ok_or("--testbench is required when DESIGN is a description file")?;
        let design_id = args
            .design
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or("design".to_string());
        let module_name = args
            .module_name
            .clone()
            .or_else(|| infer_module(&description))
            .unwrap_or_else(|| design_id.clone());
        veriforge::DesignSpec {
            design_id,
            description,
            module_name,
            ports: vec![],
            testbench_path,
            ppa_constraints: None,
        }
    };

    let violations = veriforge::validate_design_spec(&spec);
    if !violations.is_empty() {
        return Err(format!("design spec invalid: {}", violations.join("; ")));
    }

    let mut constraints = config
        .ppa_constraints
        .get(&spec.design_id)
        .cloned()
        .or(spec.ppa_constraints.clone())
        .unwrap_or_default();
    if args.max_clock_ps.is_some() {
        constraints.max_clock_ps = args.max_clock_ps;
    }
    if args.max_power_uw.is_some() {
        constraints.max_power_uw = args.max_power_uw;
    }
    if args.max_area_um2.is_some() {
        constraints.max_area_um2 = args.max_area_um2;
    }
    let mut constraints_map = BTreeMap::new();
    if !constraints.is_empty() {
        constraints_map.insert(spec.design_id.clone(), constraints);
    }

    let tools = toolbox(&config, None)?;
    let deps = PipelineDeps {
        backend: &config.backend,
        workbench: &tools.workbench,
        prompts: &tools.prompts,
        few_shot: &tools.few_shot,
    };
    let store = RunStore::new(&config.store_root);
    let run = store
        .create_run(
            args.run_id,
            config.snapshot(),
            None,
            tool_versions(&tools.workbench),
        )
        .map_err(|e| e.to_string())?;

    let specs = vec![spec];
    let result = veriforge::bench::run_benchmark(
        &specs,
        &config.rectify,
        &constraints_map,
        &config.synthesis,
        &deps,
        &run,
        &BenchOptions {
            workers: 1,
            ..Default::default()
        },
    )
    .map_err(|e| {
        let _ = run.set_status(RunStatus::Aborted);
        e.to_string()
    })?;

    let best = result
        .records
        .iter()
        .max_by_key(|r| r.final_verdict)
        .ok_or("no attempts ran")?;
    outln!("run: {}", run.run_id());
    outln!("final verdict: {}", best.final_verdict);
    if best.final_verdict >= Milestone::FunctionalPass {
        let final_v = run
            .attempt_dir(&best.design_id, attempt_index_of(&best.attempt_id))
            .join("final.v");
        if final_v.is_file() {
            outln!("output: {}", final_v.display());
        }
    }
    if best.final_verdict >= required {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn attempt_index_of(attempt_id: &str) -> usize {
    attempt_id
        .rsplit_once("attempt_")
        .and_then(|(_, n)| n.parse().ok())
        .unwrap_or(0)
}

fn infer_module(description: &str) -> Option<String> {
    let re = regex::Regex::new(r"\bmodule\s+([A-Za-z_][A-Za-z0-9_$]*)").unwrap();
    re.captures(description).map(|c| c[1].to_string())
}

fn resolve_dataset(config: &Config, name: &str) -> Result<DatasetDescriptor, String> {
    if let Some(desc) = config.datasets.get(name) {
        return Ok(desc.clone());
    }
    let path = PathBuf::from(name);
    if path.is_dir() {
        return Ok(DatasetDescriptor::design_dirs(path));
    }
    if path.is_file() && path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        return Ok(DatasetDescriptor::jsonl(path));
    }
    Err(format!(
        "dataset {name:?} is neither a configured name, a directory, nor a .jsonl file"
    ))
}

fn cmd_bench(config: Config, args: BenchArgs) -> Result<ExitCode, String> {
    let desc = resolve_dataset(&config, &args.dataset)?;
    let tools = toolbox(&config, desc.parser_rules.as_deref())?;
    let store = RunStore::new(&config.store_root);

    let (run, resume) = match &args.resume {
        Some(id) if id.is_empty() => {
            let run = store.latest_run().ok_or("no runs to resume in store")?;
            (run, true)
        }
        Some(id) => (store.open_run(id).map_err(|e| e.to_string())?, true),
        None => {
            let run = store
                .create_run(
                    args.run_id.clone(),
                    config.snapshot(),
                    serde_json::to_value(&desc).ok(),
                    tool_versions(&tools.workbench),
                )
                .map_err(|e| e.to_string())?;
            (run, false)
        }
    };

    let loaded = load_dataset(&desc, &run.path().join("materialized"), args.skip_bad)
        .map_err(|e| e.to_string())?;
    for (entry, reason) in &loaded.skipped {
        eprintln!("skipped {entry}: {reason}");
    }

    let deps = PipelineDeps {
        backend: &config.backend,
        workbench: &tools.workbench,
        prompts: &tools.prompts,
        few_shot: &tools.few_shot,
    };
    let options = BenchOptions {
        workers: config.workers,
        resume,
        attempt_budget: args.attempt_budget,
        method: if args.baseline {
            BenchMethod::PlanThenCodeBaseline
        } else {
            BenchMethod::MultiRoundRepair
        },
    };
    let result = veriforge::bench::run_benchmark(
        &loaded.specs,
        &config.rectify,
        &config.ppa_constraints,
        &config.synthesis,
        &deps,
        &run,
        &options,
    )
    .map_err(|e| {
        let _ = run.set_status(RunStatus::Aborted);
        e.to_string()
    })?;

    outln!("run: {}", run.run_id());
    out!("{}", result.scoreboard.render_markdown(&args.dataset));
    if !result.complete {
        outln!(
            "\n(interrupted by attempt budget; resume with --resume {})",
            run.run_id()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(config: Config, args: SweepArgs) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(&args.design)
        .map_err(|e| format!("{}: {e}", args.design.display()))?;
    let source = VerilogSource::initial(text, "sweep");
    let mut sweep = config.synthesis.sweep.clone();
    if let Some(v) = args.lo_ps {
        sweep.lo_ps = v;
    }
    if let Some(v) = args.hi_ps {
        sweep.hi_ps = v;
    }
    if let Some(v) = args.resolution_ps {
        sweep.resolution_ps = v;
    }
    // An adjacent meta file supplies the port list for the SDC.
    let ports = args
        .design
        .parent()
        .map(|dir| dir.join("meta.json"))
        .filter(|p| p.is_file())
        .and_then(|p| std::fs::read_to_string(p).ok())
        .and_then(|text| serde_json::from_str::<veriforge::bench::DesignMeta>(&text).ok())
        .map(|meta| meta.ports)
        .unwrap_or_default();

    let workdir = scratch_dir("sweep")?;
    let outcome = sweep_min_clock(&source, &ports, &config.synthesis.backend, &sweep, &workdir);
    let _ = std::fs::remove_dir_all(&workdir);
    match outcome {
        Ok(result) => {
            outln!("min_clock_ps: {:?}", result.min_clock_ps);
            if let (Some(power), Some(area)) = (result.report.power_uw, result.report.area_um2) {
                outln!("power_uw: {power:?}");
                outln!("area_um2: {area:?}");
            }
            outln!("synth_calls: {}", result.synth_calls);
            Ok(ExitCode::SUCCESS)
        }
        Err(veriforge::synth::SweepError::Infeasible { hi_ps, .. }) => {
            outln!("infeasible even at {hi_ps} ps");
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_report(config: Config, args: ReportArgs) -> Result<ExitCode, String> {
    let store = RunStore::new(&config.store_root);
    let run = match &args.run_id {
        Some(id) => store.open_run(id).map_err(|e| e.to_string())?,
        None => store.latest_run().ok_or("store has no runs")?,
    };
    let board = run
        .read_scoreboard()
        .or_else(|| Some(ScoreBoard::from_records(&run.load_records())))
        .filter(|b| b.attempts_total > 0)
        .ok_or_else(|| format!("run {} has no records", run.run_id()))?;
    out!("{}", board.render_markdown(run.run_id()));
    outln!(
        "per-design functional: {}%",
        board.per_design_functional_percent()
    );
    outln!("pass@1: {:.4}", board.pass_at_k(1));

    if let Some(baseline_id) = &args.baseline_run {
        let baseline = store.open_run(baseline_id).map_err(|e| e.to_string())?;
        let report = cost_report(
            &run.load_records(),
            &baseline.load_records(),
            config.macs_per_token,
        )
        .map_err(|e| e.to_string())?;
        outln!();
        out!("{}", report.render_markdown());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(config: Config, args: ValidateArgs) -> Result<ExitCode, String> {
    let mut problems = Vec::new();

    if args.run.is_none() && args.dataset.is_none() {
        // Config lint.
        if let Err(e) = config.backend.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = config.synthesis.backend.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = config.synthesis.sweep.validate() {
            problems.push(e);
        }
        if let Err(e) = config.parser_rules.compile() {
            problems.push(format!("parser_rules: {e}"));
        }
        for (id, rules) in &config.parser_rule_sets {
            if let Err(e) = rules.compile() {
                problems.push(format!("parser_rule_sets.{id}: {e}"));
            }
        }
    }
    if let Some(run_id) = &args.run {
        let store = RunStore::new(&config.store_root);
        let run = store.open_run(run_id).map_err(|e| e.to_string())?;
        problems.extend(run.validate());
    }
    if let Some(dataset) = &args.dataset {
        let desc = resolve_dataset(&config, dataset)?;
        let scratch = scratch_dir("validate")?;
        match load_dataset(&desc, &scratch, true) {
            Ok(loaded) => {
                outln!("dataset {}: {} designs", dataset, loaded.specs.len());
                for (entry, reason) in loaded.skipped {
                    problems.push(format!("{entry}: {reason}"));
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
    }

    if problems.is_empty() {
        outln!("ok");
        Ok(ExitCode::SUCCESS)
    } else {
        for problem in &problems {
            outln!("problem: {problem}");
        }
        Ok(ExitCode::from(1))
    }
}

/// Process-unique scratch directory under the system temp dir.
fn scratch_dir(tag: &str) -> Result<PathBuf, String> {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.subsec_nanos())
        .unwrap_or(0);
    let dir = std::env::temp_dir().join(format!("veriforge_{tag}_{}_{nanos}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    Ok(dir)
}
