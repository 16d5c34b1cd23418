//! Suite runs: every benchmark times every trial, each in its own directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hdlloop_core::bench::BenchmarkSpec;
use hdlloop_core::engine::LoopLimits;
use hdlloop_core::outcome::{Outcome, ReportRow, RunMetadata, SuiteReport};
use hdlloop_core::prompt::FIX_OUTPUT_LINE_LIMIT;
use rayon::prelude::*;

use crate::driver::{run_conversation, ConversationResult, DriverError, EventSink, FeedbackProvider, RunSetup, ScriptedOperator, TerminalOperator};
use crate::record::{LogError, LogWriter, Transcript};
use crate::report::{render_csv, render_markdown, render_text};
use crate::session::{ChatBackend, InteractiveBackend, RemoteBackend, RemoteConfig, ScriptedBackend, Session, SessionMeta};
use crate::suite::Suite;
use crate::toolchain::{select_tools, ToolConfig, ToolMode, ToolRunner};

pub const LOG_FILE: &str = "conversation.ndjson";
pub const OUTCOME_FILE: &str = "outcome.json";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("{benchmark} {trial}: {source}")]
    Trial { benchmark: String, trial: String, source: DriverError },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub enum BackendChoice {
    /// Replies from transcripts under this directory.
    Scripted(PathBuf),
    Remote(RemoteConfig),
    Interactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OperatorChoice {
    /// Feedback from the transcript (scripted backends only).
    Transcript,
    /// Ask on the terminal.
    Terminal,
}

#[derive(Debug, Clone)]
pub struct SuiteRunConfig {
    pub out_dir: PathBuf,
    pub trials: u32,
    pub limits: LoopLimits,
    pub tool_mode: ToolMode,
    pub tools: ToolConfig,
    pub backend: BackendChoice,
    pub operator: OperatorChoice,
    pub resume: bool,
    pub jobs: usize,
}

pub fn trial_label(n: u32) -> String {
    format!("T{n}")
}

pub fn trial_dir(out: &Path, benchmark: &str, trial: &str) -> PathBuf {
    out.join(benchmark).join(trial)
}

/// `DIR/<benchmark>/<trial>.ndjson`, falling back to `DIR/<benchmark>.ndjson`.
pub fn transcript_path(dir: &Path, benchmark: &str, trial: &str) -> Option<PathBuf> {
    [dir.join(benchmark).join(format!("{trial}.ndjson")), dir.join(format!("{benchmark}.ndjson"))].into_iter().find(|p| p.is_file())
}

/// Everything needed to run one trial.
pub struct TrialPlan<'a> {
    pub spec: &'a BenchmarkSpec,
    pub golden_testbench: &'a str,
    pub trial: String,
    pub backend: Box<dyn ChatBackend>,
    pub operator: Box<dyn FeedbackProvider>,
    pub tools: Arc<dyn ToolRunner>,
    pub limits: LoopLimits,
    pub tool_config: &'a ToolConfig,
    pub log: Option<PathBuf>,
}

pub fn run_trial(plan: TrialPlan<'_>, sink: &dyn EventSink) -> Result<ConversationResult, DriverError> {
    let meta = SessionMeta {
        conversation_id: format!("{}-{}", plan.spec.id, plan.trial),
        benchmark_id: plan.spec.id.clone(),
        trial_label: plan.trial.clone(),
        limits: plan.limits,
    };
    let log = match &plan.log {
        Some(p) => Some(LogWriter::create(p).map_err(crate::session::SessionError::from)?),
        None => None,
    };
    let mut session = Session::open(&meta, plan.backend, log)?;
    let setup = RunSetup {
        spec: plan.spec,
        golden_testbench: Some(plan.golden_testbench),
        tools: plan.tools.as_ref(),
        patterns: &plan.tool_config.patterns,
        limits: plan.limits,
    };
    let mut operator = plan.operator;
    run_conversation(&setup, &mut session, operator.as_mut(), sink)
}

fn write_artifacts(dir: &Path, r: &ConversationResult) -> Result<(), RunError> {
    for (name, text) in [("design.v", &r.design), ("testbench.v", &r.testbench)] {
        let p = dir.join(name);
        fs::write(&p, text).map_err(io(&p))?;
    }
    let p = dir.join(OUTCOME_FILE);
    let json = serde_json::to_string_pretty(&r.outcome).expect("outcome serializes");
    fs::write(&p, json + "\n").map_err(io(&p))
}

fn previous_outcome(dir: &Path) -> Option<Outcome> {
    let text = fs::read_to_string(dir.join(OUTCOME_FILE)).ok()?;
    serde_json::from_str(&text).ok()
}

struct Job<'a> {
    spec: &'a BenchmarkSpec,
    trial: String,
}

fn plan_job<'a>(
    suite: &'a Suite,
    cfg: &'a SuiteRunConfig,
    live: &Option<Arc<dyn ToolRunner>>,
    job: &Job<'a>,
    operator_override: Option<Box<dyn FeedbackProvider>>,
) -> Result<Result<TrialPlan<'a>, String>, RunError> {
    let (backend, operator, records): (Box<dyn ChatBackend>, Box<dyn FeedbackProvider>, Vec<_>) = match &cfg.backend {
        BackendChoice::Scripted(dir) => {
            let path = transcript_path(dir, &job.spec.id, &job.trial)
                .ok_or_else(|| RunError::Config(format!("no transcript for {} {} under {}", job.spec.id, job.trial, dir.display())))?;
            let t = Transcript::load(&path)?;
            let op: Box<dyn FeedbackProvider> = match cfg.operator {
                OperatorChoice::Transcript => Box::new(ScriptedOperator { actions: t.actions.clone() }),
                OperatorChoice::Terminal => Box::new(TerminalOperator::stdio()),
            };
            (Box::new(ScriptedBackend::new(&t)), op, t.tools.clone())
        }
        BackendChoice::Remote(rc) => match RemoteBackend::open(rc.clone()) {
            Ok(b) => (Box::new(b), Box::new(TerminalOperator::stdio()), Vec::new()),
            Err(e) => return Ok(Err(e.to_string())),
        },
        BackendChoice::Interactive => (Box::new(InteractiveBackend::stdio()), Box::new(TerminalOperator::stdio()), Vec::new()),
    };
    let operator = operator_override.unwrap_or(operator);
    let tools = match live {
        Some(t) => t.clone(),
        None => match select_tools(cfg.tool_mode, &cfg.tools, records) {
            Ok(t) => t,
            Err(e) => return Ok(Err(e.to_string())),
        },
    };
    Ok(Ok(TrialPlan {
        spec: job.spec,
        golden_testbench: suite.golden_testbench(job.spec),
        trial: job.trial.clone(),
        backend,
        operator,
        tools,
        limits: cfg.limits,
        tool_config: &cfg.tools,
        log: Some(trial_dir(&cfg.out_dir, &job.spec.id, &job.trial).join(LOG_FILE)),
    }))
}

fn run_job(
    suite: &Suite,
    cfg: &SuiteRunConfig,
    live: &Option<Arc<dyn ToolRunner>>,
    job: &Job<'_>,
    operator: Option<Box<dyn FeedbackProvider>>,
    sink: &dyn EventSink,
) -> Result<ReportRow, RunError> {
    let dir = trial_dir(&cfg.out_dir, &job.spec.id, &job.trial);
    if cfg.resume {
        if let Some(o) = previous_outcome(&dir) {
            tracing::info!(benchmark = %job.spec.id, trial = %job.trial, "resumed from previous outcome");
            return Ok(ReportRow::Completed(o));
        }
    }
    let skipped = |message: String| {
        tracing::warn!(benchmark = %job.spec.id, trial = %job.trial, "skipped: {message}");
        ReportRow::SkippedEnv { benchmark_id: job.spec.id.clone(), trial_label: job.trial.clone(), message }
    };
    let plan = match plan_job(suite, cfg, live, job, operator)? {
        Ok(p) => p,
        Err(message) => return Ok(skipped(message)),
    };
    fs::create_dir_all(&dir).map_err(io(&dir))?;
    match run_trial(plan, sink) {
        Ok(r) => {
            write_artifacts(&dir, &r)?;
            tracing::info!(benchmark = %job.spec.id, trial = %job.trial, outcome = %r.outcome.terminal, "trial finished");
            Ok(ReportRow::Completed(r.outcome))
        }
        Err(e) if e.is_environment() => Ok(skipped(e.to_string())),
        Err(source) => Err(RunError::Trial { benchmark: job.spec.id.clone(), trial: job.trial.clone(), source }),
    }
}

/// Runs the suite and writes `report.{json,txt,csv,md}` into the output directory.
pub fn run_suite(suite: &Suite, cfg: &SuiteRunConfig, sink: &dyn EventSink) -> Result<SuiteReport, RunError> {
    cfg.limits.validate().map_err(|e| RunError::Config(e.to_string()))?;
    let started = chrono::Utc::now().to_rfc3339();
    let jobs: Vec<Job<'_>> = suite
        .benchmarks
        .iter()
        .flat_map(|spec| (1..=cfg.trials).map(move |n| Job { spec, trial: trial_label(n) }))
        .collect();
    // Live tools are shared across trials; recorded ones come from each transcript.
    let live: Option<Arc<dyn ToolRunner>> = match cfg.tool_mode {
        ToolMode::Recorded => None,
        _ => select_tools(ToolMode::Live, &cfg.tools, Vec::new()).ok(),
    };
    let interactive = cfg.operator == OperatorChoice::Terminal || matches!(cfg.backend, BackendChoice::Interactive);
    let threads = if interactive { 1 } else { cfg.jobs.max(1) };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| RunError::Config(e.to_string()))?;
    let rows: Vec<ReportRow> = pool.install(|| jobs.par_iter().map(|j| run_job(suite, cfg, &live, j, None, sink)).collect::<Result<_, _>>())?;

    let (backend, model, temperature) = match &cfg.backend {
        BackendChoice::Scripted(_) => ("scripted".to_string(), None, None),
        BackendChoice::Remote(rc) => ("remote".to_string(), Some(rc.model.clone()), rc.temperature.map(|t| t.to_string())),
        BackendChoice::Interactive => ("interactive".to_string(), None, None),
    };
    let mut sampling = std::collections::BTreeMap::new();
    if let BackendChoice::Remote(rc) = &cfg.backend {
        if let Some(p) = rc.top_p {
            sampling.insert("top_p".to_string(), p.to_string());
        }
        if let Some(n) = rc.max_tokens {
            sampling.insert("max_tokens".to_string(), n.to_string());
        }
    }
    let metadata = RunMetadata {
        backend,
        model,
        temperature,
        sampling,
        started: Some(started),
        finished: Some(chrono::Utc::now().to_rfc3339()),
        tool_versions: live.as_ref().map(|t| t.versions()).unwrap_or_default(),
        fix_output_line_limit: FIX_OUTPUT_LINE_LIMIT,
        trials: cfg.trials,
    };
    let report = SuiteReport::new(metadata, rows);
    write_report(&cfg.out_dir, &report)?;
    Ok(report)
}

/// Runs one trial of one benchmark, optionally with a given operator.
pub fn run_single(
    suite: &Suite,
    cfg: &SuiteRunConfig,
    benchmark: &str,
    trial: &str,
    operator: Option<Box<dyn FeedbackProvider>>,
    sink: &dyn EventSink,
) -> Result<ReportRow, RunError> {
    let spec = suite.get(benchmark).map_err(|e| RunError::Config(e.to_string()))?;
    let live = match cfg.tool_mode {
        ToolMode::Recorded => None,
        _ => select_tools(ToolMode::Live, &cfg.tools, Vec::new()).ok(),
    };
    run_job(suite, cfg, &live, &Job { spec, trial: trial.to_string() }, operator, sink)
}

pub fn write_report(dir: &Path, report: &SuiteReport) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let csv = render_csv(report).map_err(|e| RunError::Config(e.to_string()))?;
    let files = [
        ("report.json", serde_json::to_string_pretty(report).expect("report serializes") + "\n"),
        ("report.txt", render_text(report)),
        ("report.csv", csv),
        ("report.md", render_markdown(report)),
    ];
    for (name, text) in files {
        let p = dir.join(name);
        fs::write(&p, text).map_err(io(&p))?;
    }
    Ok(())
}
