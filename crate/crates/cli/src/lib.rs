//! Command-line front door: validate spaces, execute optimizer runs,
//! compute error contributions from trial logs, and render comparison
//! reports (CSV, SVG bar charts, timing summary).
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or input validation.
//! Everything reachable from flags is also expressible in one run-config
//! JSON document, so experiments can be scripted and replayed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pipeattrib_core::eval::{parse_loss_table, Evaluator, EvaluatorSpec};
use pipeattrib_core::space::{ConfigSpace, Path};
use pipeattrib_core::store::{ModeKind, OptimizerKind, RunSet, TrialStore};
use pipeattrib_core::{
    aggregate, builtin, ec_algorithm, ec_algorithm_reopt, ec_chart_svg, ec_hyperparameter,
    ec_hyperparameter_reopt, ec_step, ec_step_reopt, parse_ec_csv, run, timing_chart_svg,
    write_ec_csv, AttrError, ECEstimate, ReoptPlan, ReportRow, RunMode, RunSpec, StopReason,
    TimingRow, OPTIMIZER_ORDER, UNLIMITED,
};

/// A failure paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    fn usage(error: anyhow::Error) -> Failure {
        Failure { code: 2, error }
    }

    fn runtime(error: anyhow::Error) -> Failure {
        Failure { code: 1, error }
    }
}

pub type CliResult<T> = Result<T, Failure>;

#[derive(Parser)]
#[command(
    name = "pipeattrib",
    version,
    about = "Pipeline configuration-space optimization and error attribution"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Check a space document and print its counts.
    Validate(ValidateArgs),
    /// Execute optimizer runs and write trial logs plus a run summary.
    Run(Box<RunArgs>),
    /// Compute error contributions from trial logs into a CSV report.
    Attribute(Box<AttributeArgs>),
    /// Render attribution CSVs and run summaries into SVG charts.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct ValidateArgs {
    /// Built-in space name (fix6, imgcls, miniml) or path to a space JSON.
    #[arg(long)]
    pub space: String,
}

#[derive(Args)]
pub struct RunArgs {
    /// Run-config JSON describing space, evaluator, and run entries.
    #[arg(long, conflicts_with_all = ["space", "evaluator", "optimizer", "path", "budget"])]
    pub config: Option<PathBuf>,

    /// Built-in space name or path to a space JSON.
    #[arg(long)]
    pub space: Option<String>,

    /// Built-in evaluator (synthetic, miniml, fix6) or path to an
    /// evaluator-spec JSON / loss-table JSON.
    #[arg(long)]
    pub evaluator: Option<String>,

    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,

    /// Optimization scope: the whole space (cash) or one path (hpo).
    #[arg(long, value_enum, default_value_t = RunModeArg::Cash)]
    pub mode: RunModeArg,

    /// Path id (algo1->algo2->...); required with --mode hpo.
    #[arg(long)]
    pub path: Option<String>,

    /// Evaluation budget; defaults to the scope size (exhaustive).
    #[arg(long)]
    pub budget: Option<u64>,

    /// Consecutive non-improving trials before stopping; "inf" disables.
    #[arg(long, default_value = "50", value_parser = parse_patience)]
    pub patience: u64,

    /// Independent repeats with seeds seed, seed+1, ...; grid is forced to 1.
    #[arg(long, default_value_t = 5)]
    pub repeats: u32,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output directory; falls back to $PIPEATTRIB_OUT, then ./pipeattrib-out.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct AttributeArgs {
    /// Built-in space name or path to a space JSON.
    #[arg(long)]
    pub space: String,

    /// Trial logs (JSONL) to load; repeatable. Required in filter mode.
    #[arg(long = "log")]
    pub logs: Vec<PathBuf>,

    #[arg(long, value_enum)]
    pub level: LevelArg,

    /// Path id; required for algorithm and hyperparameter levels.
    #[arg(long)]
    pub path: Option<String>,

    /// filter reuses logged trials; reopt runs dedicated constrained searches.
    #[arg(long, value_enum, default_value_t = AttrModeArg::Filter)]
    pub mode: AttrModeArg,

    /// Evaluator for reopt mode's constrained runs.
    #[arg(long)]
    pub evaluator: Option<String>,

    /// Optimizer for reopt mode's constrained runs.
    #[arg(long, value_enum, default_value_t = OptimizerArg::Random)]
    pub optimizer: OptimizerArg,

    /// Budget per constrained run (reopt); defaults to the constraint's
    /// scope size.
    #[arg(long)]
    pub budget: Option<u64>,

    /// Patience for constrained runs (reopt); "inf" disables.
    #[arg(long, default_value = "50", value_parser = parse_patience)]
    pub patience: u64,

    /// Independent reopt repeats with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub repeats: u32,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output directory; falls back to $PIPEATTRIB_OUT, then ./pipeattrib-out.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Attribution CSVs produced by `attribute`; repeatable.
    #[arg(long = "csv")]
    pub csvs: Vec<PathBuf>,

    /// Run-summary JSONs produced by `run`, for the timing chart.
    #[arg(long = "summary")]
    pub summaries: Vec<PathBuf>,

    /// Title prefix for the charts.
    #[arg(long, default_value = "Error contribution")]
    pub title: String,

    /// Output directory; falls back to $PIPEATTRIB_OUT, then ./pipeattrib-out.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Grid,
    Random,
    Smbo,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(a: OptimizerArg) -> OptimizerKind {
        match a {
            OptimizerArg::Grid => OptimizerKind::Grid,
            OptimizerArg::Random => OptimizerKind::Random,
            OptimizerArg::Smbo => OptimizerKind::Smbo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RunModeArg {
    Cash,
    Hpo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttrModeArg {
    Filter,
    Reopt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Step,
    Algorithm,
    Hyperparameter,
}

fn parse_patience(s: &str) -> Result<u64, String> {
    if s == "inf" || s == "none" {
        return Ok(UNLIMITED);
    }
    match s.parse::<u64>() {
        Ok(0) => Err("patience must be >= 1 (or \"inf\")".to_owned()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// Scriptable equivalent of the `run` flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: String,
    pub evaluator: EvalRef,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub runs: Vec<RunEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    pub optimizer: OptimizerKind,
    /// cash (default) or hpo.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Defaults to the scope size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    /// Number or "inf"; defaults to 50.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<PatienceValue>,
    /// Defaults to 5; grid is forced to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatienceValue {
    Count(u64),
    Word(String),
}

impl PatienceValue {
    fn resolve(&self) -> Result<u64, String> {
        match self {
            PatienceValue::Count(0) => Err("patience must be >= 1 (or \"inf\")".to_owned()),
            PatienceValue::Count(n) => Ok(*n),
            PatienceValue::Word(w) => parse_patience(w),
        }
    }
}

/// Evaluator reference: a built-in name / file path, or an inline spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EvalRef {
    Name(String),
    Spec(EvaluatorSpec),
}

/// Per-run outcome recorded in run-summary.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_id: String,
    pub optimizer: OptimizerKind,
    pub mode: ModeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub seed: u64,
    pub budget: u64,
    pub patience: u64,
    pub trial_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_config: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_loss: Option<f64>,
    pub stop_reason: StopReason,
    pub elapsed_ms: u64,
    /// Trial log file name, relative to the summary.
    pub log: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub space: String,
    pub evaluator: String,
    pub seed: u64,
    pub runs: Vec<RunOutcome>,
}

pub fn run_cli(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Attribute(args) => cmd_attribute(&args),
        Command::Report(args) => cmd_report(&args),
    }
}

fn cmd_validate(args: &ValidateArgs) -> CliResult<()> {
    let space = load_space(&args.space)?;
    println!("space {}: {} steps", space.name(), space.steps().len());
    for step in space.steps() {
        let names: Vec<&str> = step.algorithms.iter().map(|a| a.name.as_str()).collect();
        println!(
            "  {}: {} algorithms ({})",
            step.name,
            step.algorithms.len(),
            names.join(", ")
        );
    }
    println!(
        "{} paths, {} configurations",
        space.path_count(),
        space.total_configurations()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> CliResult<()> {
    let config = run_config_from(args)?;
    let space = load_space(&config.space)?;
    let evaluator_label = eval_label(&config.evaluator);
    let evaluator = build_evaluator(&config.evaluator)?;
    let dir = out_dir(args.out.clone().or_else(|| config.out.clone().map(PathBuf::from)));
    fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(Failure::runtime)?;

    if config.runs.is_empty() {
        return Err(Failure::usage(anyhow!("run config lists no runs")));
    }
    let mut seen_ids = std::collections::BTreeSet::new();
    let mut outcomes = Vec::new();
    for entry in &config.runs {
        let optimizer = entry.optimizer;
        let mode_kind = entry.mode.unwrap_or(ModeKind::Cash);
        let mode = match mode_kind {
            ModeKind::Cash => RunMode::Cash,
            ModeKind::Hpo => {
                let id = entry.path.as_deref().ok_or_else(|| {
                    Failure::usage(anyhow!("--mode hpo requires --path <algo1->algo2->...>"))
                })?;
                RunMode::Hpo(parse_path(&space, id)?)
            }
        };
        let scope_size = match &mode {
            RunMode::Cash => space.total_configurations(),
            RunMode::Hpo(path) => space.path_configurations(path),
        };
        let budget = entry.budget.unwrap_or(scope_size);
        let patience = match &entry.patience {
            Some(p) => p.resolve().map_err(|e| Failure::usage(anyhow!(e)))?,
            None => 50,
        };
        let repeats = match entry.repeats {
            Some(0) => return Err(Failure::usage(anyhow!("repeats must be >= 1"))),
            Some(n) => n,
            None => 5,
        };
        // Grid search is deterministic, so repeating it is pure waste.
        let repeats = if optimizer == OptimizerKind::Grid { 1 } else { repeats };

        for r in 0..repeats {
            let run_id = format!("{optimizer}-{mode_kind}-r{r}");
            if !seen_ids.insert(run_id.clone()) {
                return Err(Failure::usage(anyhow!(
                    "duplicate run id {run_id}: two entries share optimizer and mode"
                )));
            }
            let seed = config.seed.wrapping_add(u64::from(r));
            let spec = RunSpec::new(run_id.clone(), optimizer, mode.clone(), budget, patience, seed)
                .map_err(|e| Failure::usage(anyhow!(e)))?;
            let mut store = TrialStore::new();
            let started = Instant::now();
            let result = run(&space, &evaluator, &mut store, &spec)
                .map_err(|e| Failure::runtime(anyhow!(e)))?;
            let elapsed_ms = started.elapsed().as_millis() as u64;

            let log_name = format!("{run_id}.jsonl");
            store
                .persist_to_path(&dir.join(&log_name))
                .with_context(|| format!("cannot write {log_name}"))
                .map_err(Failure::runtime)?;

            let best = result.best.as_ref();
            println!(
                "run {run_id}: {} trials, best {} at {}, stopped on {} ({} ms)",
                result.trial_count,
                best.and_then(|t| t.loss).map_or("-".to_owned(), |l| l.to_string()),
                best.map_or("-", |t| t.config.as_str()),
                result.stop_reason,
                elapsed_ms,
            );
            outcomes.push(RunOutcome {
                run_id,
                optimizer,
                mode: mode_kind,
                path: entry.path.clone(),
                seed,
                budget,
                patience,
                trial_count: result.trial_count,
                best_config: best.map(|t| t.config.clone()),
                best_loss: best.and_then(|t| t.loss),
                stop_reason: result.stop_reason,
                elapsed_ms,
                log: log_name,
            });
        }
    }

    let summary = RunSummary {
        space: config.space.clone(),
        evaluator: evaluator_label,
        seed: config.seed,
        runs: outcomes,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let path = dir.join("run-summary.json");
    fs::write(&path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::runtime)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run_config_from(args: &RunArgs) -> CliResult<RunConfig> {
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read run config {}", path.display()))
            .map_err(Failure::usage)?;
        return serde_json::from_str(&text)
            .with_context(|| format!("bad run config {}", path.display()))
            .map_err(Failure::usage);
    }
    let space = args
        .space
        .clone()
        .ok_or_else(|| Failure::usage(anyhow!("--space is required (or use --config)")))?;
    let evaluator = args
        .evaluator
        .clone()
        .ok_or_else(|| Failure::usage(anyhow!("--evaluator is required (or use --config)")))?;
    let optimizer = args
        .optimizer
        .ok_or_else(|| Failure::usage(anyhow!("--optimizer is required (or use --config)")))?;
    Ok(RunConfig {
        space,
        evaluator: EvalRef::Name(evaluator),
        seed: args.seed,
        out: None,
        runs: vec![RunEntry {
            optimizer: optimizer.into(),
            mode: Some(match args.mode {
                RunModeArg::Cash => ModeKind::Cash,
                RunModeArg::Hpo => ModeKind::Hpo,
            }),
            path: args.path.clone(),
            budget: args.budget,
            patience: Some(PatienceValue::Count(args.patience)),
            repeats: Some(args.repeats),
        }],
    })
}

fn cmd_attribute(args: &AttributeArgs) -> CliResult<()> {
    let space = load_space(&args.space)?;
    let path = match args.level {
        LevelArg::Step => None,
        LevelArg::Algorithm | LevelArg::Hyperparameter => {
            let id = args.path.as_deref().ok_or_else(|| {
                Failure::usage(anyhow!(
                    "--level {} requires --path <algo1->algo2->...>",
                    level_name(args.level)
                ))
            })?;
            Some(parse_path(&space, id)?)
        }
    };
    if args.mode == AttrModeArg::Filter && args.logs.is_empty() {
        return Err(Failure::usage(anyhow!(
            "filter mode needs at least one --log file"
        )));
    }

    let mut store = TrialStore::new();
    for log in &args.logs {
        merge_log(&mut store, log)?;
    }

    let rows = match args.mode {
        AttrModeArg::Filter => attribute_filter(&space, &store, args.level, path.as_ref())?,
        AttrModeArg::Reopt => attribute_reopt(&space, &mut store, args, path.as_ref())?,
    };

    let dir = out_dir(args.out.clone());
    fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(Failure::runtime)?;
    let file = dir.join(format!("ec-{}.csv", level_name(args.level)));
    fs::write(&file, write_ec_csv(&rows))
        .with_context(|| format!("cannot write {}", file.display()))
        .map_err(Failure::runtime)?;

    for r in &rows {
        println!(
            "{} {} [{}] {} {}: mean={} std={} runs={}",
            r.level, r.target, r.path, r.optimizer, r.mode, r.mean, r.std, r.run_count
        );
    }
    println!("wrote {}", file.display());
    Ok(())
}

/// Targets of one attribution level, in declaration order.
fn level_targets(space: &ConfigSpace, level: LevelArg, path: Option<&Path>) -> Vec<String> {
    match level {
        LevelArg::Step => space.steps().iter().map(|s| s.name.clone()).collect(),
        LevelArg::Algorithm => {
            let path = path.expect("path checked by caller");
            (0..space.steps().len())
                .map(|s| space.algorithm_on(path, s).name.clone())
                .collect()
        }
        LevelArg::Hyperparameter => {
            let path = path.expect("path checked by caller");
            space
                .active_hps(path)
                .into_iter()
                .map(|slot| space.hyperparameter_at(path, slot).name.clone())
                .collect()
        }
    }
}

fn estimate_filter(
    space: &ConfigSpace,
    store: &TrialStore,
    level: LevelArg,
    path: Option<&Path>,
    target: &str,
    runs: &RunSet,
) -> Result<ECEstimate, AttrError> {
    match level {
        LevelArg::Step => ec_step(store, space, target, runs),
        LevelArg::Algorithm => ec_algorithm(store, space, path.unwrap(), target, runs),
        LevelArg::Hyperparameter => ec_hyperparameter(store, space, path.unwrap(), target, runs),
    }
}

fn attribute_filter(
    space: &ConfigSpace,
    store: &TrialStore,
    level: LevelArg,
    path: Option<&Path>,
) -> CliResult<Vec<ReportRow>> {
    let mut by_optimizer: BTreeMap<OptimizerKind, Vec<String>> = BTreeMap::new();
    for id in store.run_ids() {
        let meta = store.run_meta(id).expect("listed run has metadata");
        by_optimizer
            .entry(meta.optimizer)
            .or_default()
            .push(id.to_owned());
    }
    if by_optimizer.is_empty() {
        return Err(Failure::usage(anyhow!("the loaded logs contain no runs")));
    }

    let targets = level_targets(space, level, path);
    let mut rows = Vec::new();
    for optimizer in OPTIMIZER_ORDER {
        let Some(run_ids) = by_optimizer.get(&optimizer) else {
            continue;
        };
        for target in &targets {
            let mut estimates = Vec::with_capacity(run_ids.len());
            for run_id in run_ids {
                let runs = RunSet::of([run_id.clone()]);
                let est = estimate_filter(space, store, level, path, target, &runs)
                    .map_err(attr_failure)?;
                estimates.push(est);
            }
            let agg = aggregate(&estimates, optimizer).map_err(attr_failure)?;
            rows.push(ReportRow::from_aggregate(&agg));
        }
    }
    Ok(rows)
}

fn attribute_reopt(
    space: &ConfigSpace,
    store: &mut TrialStore,
    args: &AttributeArgs,
    path: Option<&Path>,
) -> CliResult<Vec<ReportRow>> {
    let eval_ref = args
        .evaluator
        .as_deref()
        .ok_or_else(|| Failure::usage(anyhow!("reopt mode requires --evaluator")))?;
    let evaluator = build_evaluator(&EvalRef::Name(eval_ref.to_owned()))?;
    let optimizer: OptimizerKind = args.optimizer.into();
    let main_runs = RunSet::of(store.run_ids().map(str::to_owned).collect::<Vec<_>>());

    // Default budget: the scope a constrained run searches, which is the
    // whole space for steps and one path otherwise.
    let scope_size = match path {
        None => space.total_configurations(),
        Some(p) => space.path_configurations(p),
    };
    let budget = args.budget.unwrap_or(scope_size);
    if args.repeats == 0 {
        return Err(Failure::usage(anyhow!("repeats must be >= 1")));
    }

    let targets = level_targets(space, args.level, path);
    let mut rows = Vec::new();
    for target in &targets {
        let mut estimates = Vec::with_capacity(args.repeats as usize);
        for r in 0..args.repeats {
            let plan = ReoptPlan::new(
                optimizer,
                budget,
                args.patience,
                args.seed.wrapping_add(u64::from(r)),
                format!("reopt{r}/"),
            );
            let est = match args.level {
                LevelArg::Step => {
                    ec_step_reopt(store, space, &evaluator, target, &main_runs, &plan)
                }
                LevelArg::Algorithm => ec_algorithm_reopt(
                    store,
                    space,
                    &evaluator,
                    path.unwrap(),
                    target,
                    &main_runs,
                    &plan,
                ),
                LevelArg::Hyperparameter => ec_hyperparameter_reopt(
                    store,
                    space,
                    &evaluator,
                    path.unwrap(),
                    target,
                    &main_runs,
                    &plan,
                ),
            }
            .map_err(attr_failure)?;
            estimates.push(est);
        }
        let agg = aggregate(&estimates, optimizer).map_err(attr_failure)?;
        rows.push(ReportRow::from_aggregate(&agg));
    }
    Ok(rows)
}

fn cmd_report(args: &ReportArgs) -> CliResult<()> {
    if args.csvs.is_empty() && args.summaries.is_empty() {
        return Err(Failure::usage(anyhow!(
            "nothing to report: pass --csv and/or --summary files"
        )));
    }
    let mut rows: Vec<ReportRow> = Vec::new();
    for file in &args.csvs {
        let text = fs::read_to_string(file)
            .with_context(|| format!("cannot read {}", file.display()))
            .map_err(Failure::usage)?;
        let parsed = parse_ec_csv(&text)
            .with_context(|| format!("bad attribution CSV {}", file.display()))
            .map_err(Failure::usage)?;
        rows.extend(parsed);
    }
    let mut summaries: Vec<RunSummary> = Vec::new();
    for file in &args.summaries {
        let text = fs::read_to_string(file)
            .with_context(|| format!("cannot read {}", file.display()))
            .map_err(Failure::usage)?;
        let summary: RunSummary = serde_json::from_str(&text)
            .with_context(|| format!("bad run summary {}", file.display()))
            .map_err(Failure::usage)?;
        summaries.push(summary);
    }

    let dir = out_dir(args.out.clone());
    fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(Failure::runtime)?;

    let mut written = Vec::new();
    for level in ["step", "algorithm", "hyperparameter"] {
        if !rows.iter().any(|r| r.level == level) {
            continue;
        }
        let title = format!("{} by {level}", args.title);
        let svg = ec_chart_svg(&title, level, &rows).expect("level has rows");
        let file = dir.join(format!("chart-{level}.svg"));
        fs::write(&file, svg)
            .with_context(|| format!("cannot write {}", file.display()))
            .map_err(Failure::runtime)?;
        written.push(file);
    }

    let timing = timing_rows(&summaries);
    if !timing.is_empty() {
        let svg = timing_chart_svg("Wall-clock per run group", &timing).expect("rows not empty");
        let file = dir.join("chart-timing.svg");
        fs::write(&file, svg)
            .with_context(|| format!("cannot write {}", file.display()))
            .map_err(Failure::runtime)?;
        written.push(file);
    }

    let file = dir.join("summary.md");
    fs::write(&file, summary_markdown(&rows, &timing))
        .with_context(|| format!("cannot write {}", file.display()))
        .map_err(Failure::runtime)?;
    written.push(file);

    for f in &written {
        println!("wrote {}", f.display());
    }
    Ok(())
}

/// Mean wall-clock seconds per (optimizer, mode) group, in display order.
fn timing_rows(summaries: &[RunSummary]) -> Vec<TimingRow> {
    let mut acc: BTreeMap<(OptimizerKind, ModeKind), (f64, u32)> = BTreeMap::new();
    for s in summaries {
        for r in &s.runs {
            let cell = acc.entry((r.optimizer, r.mode)).or_insert((0.0, 0));
            cell.0 += r.elapsed_ms as f64 / 1000.0;
            cell.1 += 1;
        }
    }
    let mut rows = Vec::new();
    for optimizer in OPTIMIZER_ORDER {
        for mode in [ModeKind::Cash, ModeKind::Hpo] {
            if let Some((total, n)) = acc.get(&(optimizer, mode)) {
                rows.push(TimingRow {
                    label: format!("{optimizer}/{mode}"),
                    seconds: total / f64::from(*n),
                });
            }
        }
    }
    rows
}

fn summary_markdown(rows: &[ReportRow], timing: &[TimingRow]) -> String {
    let mut md = String::from("# Attribution summary\n");
    for level in ["step", "algorithm", "hyperparameter"] {
        let level_rows: Vec<&ReportRow> = rows.iter().filter(|r| r.level == level).collect();
        if level_rows.is_empty() {
            continue;
        }
        let _ = write!(md, "\n## {level}\n\n");
        md.push_str("| target | path | optimizer | mode | mean | std | reference min | runs |\n");
        md.push_str("|---|---|---|---|---|---|---|---|\n");
        for r in level_rows {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {:.4} | {:.4} | {:.4} | {} |",
                r.target, r.path, r.optimizer, r.mode, r.mean, r.std, r.reference_min, r.run_count
            );
        }
    }
    if !timing.is_empty() {
        md.push_str("\n## timing\n\n| run group | mean seconds |\n|---|---|\n");
        for t in timing {
            let _ = writeln!(md, "| {} | {:.4} |", t.label, t.seconds);
        }
    }
    md
}

fn level_name(level: LevelArg) -> &'static str {
    match level {
        LevelArg::Step => "step",
        LevelArg::Algorithm => "algorithm",
        LevelArg::Hyperparameter => "hyperparameter",
    }
}

/// Coverage and lookup problems are runtime failures (the data cannot
/// answer the question); everything else in AttrError stems from bad
/// input names and is a usage failure.
fn attr_failure(err: AttrError) -> Failure {
    match err {
        AttrError::Coverage { .. } | AttrError::Store(_) | AttrError::Opt(_) => {
            Failure::runtime(anyhow!(err))
        }
        _ => Failure::usage(anyhow!(err)),
    }
}

fn merge_log(store: &mut TrialStore, log: &PathBuf) -> CliResult<()> {
    let loaded = TrialStore::load_from_path(log)
        .with_context(|| format!("cannot load trial log {}", log.display()))
        .map_err(Failure::usage)?;
    for trial in loaded.trials() {
        store
            .record(trial.clone())
            .with_context(|| format!("while merging {}", log.display()))
            .map_err(Failure::usage)?;
    }
    Ok(())
}

fn load_space(name_or_path: &str) -> CliResult<ConfigSpace> {
    if let Some(space) = builtin::builtin_space(name_or_path) {
        return Ok(space);
    }
    let text = fs::read_to_string(name_or_path)
        .with_context(|| format!("cannot read space '{name_or_path}' (not a built-in name)"))
        .map_err(Failure::usage)?;
    ConfigSpace::parse(&text)
        .with_context(|| format!("invalid space document '{name_or_path}'"))
        .map_err(Failure::usage)
}

fn parse_path(space: &ConfigSpace, id: &str) -> CliResult<Path> {
    space
        .parse_path_id(id)
        .with_context(|| format!("unknown path '{id}'"))
        .map_err(Failure::usage)
}

fn eval_label(r: &EvalRef) -> String {
    match r {
        EvalRef::Name(n) => n.clone(),
        EvalRef::Spec(s) => serde_json::to_string(s).expect("spec serializes"),
    }
}

fn build_evaluator(r: &EvalRef) -> CliResult<Evaluator> {
    let spec = match r {
        EvalRef::Spec(spec) => spec.clone(),
        EvalRef::Name(name) => match name.as_str() {
            "synthetic" => EvaluatorSpec::Synthetic {
                noise_std: 0.0,
                seed: 0,
            },
            "miniml" | "mini-ml" => EvaluatorSpec::MiniMl {
                dataset: "mini150".to_owned(),
                k: 5,
                seed: 0,
            },
            "fix6" => EvaluatorSpec::LossTable {
                path: None,
                table: Some(
                    parse_loss_table(builtin::FIX6_LOSSES_JSON).expect("embedded table is valid"),
                ),
            },
            path => evaluator_spec_from_file(path)?,
        },
    };
    Evaluator::from_spec(&spec)
        .map_err(|e| Failure::runtime(anyhow!(e).context("cannot construct evaluator")))
}

/// A file referenced by `--evaluator` holds either an evaluator spec or a
/// bare loss-table map.
fn evaluator_spec_from_file(path: &str) -> CliResult<EvaluatorSpec> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read evaluator '{path}' (not a built-in name)"))
        .map_err(Failure::usage)?;
    if let Ok(spec) = serde_json::from_str::<EvaluatorSpec>(&text) {
        return Ok(spec);
    }
    match parse_loss_table(&text) {
        Ok(table) if !table.is_empty() => Ok(EvaluatorSpec::LossTable {
            path: None,
            table: Some(table),
        }),
        _ => Err(Failure::usage(anyhow!(
            "'{path}' is neither an evaluator spec nor a loss table"
        ))),
    }
}

fn out_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os("PIPEATTRIB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("pipeattrib-out"))
}
