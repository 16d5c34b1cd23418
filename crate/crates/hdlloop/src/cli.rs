//! Command-line interface.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use hdlloop_core::engine::LoopLimits;
use hdlloop_core::outcome::ReportRow;
use hdlloop_core::prompt::{render_design_prompt, TESTBENCH_PROMPT};
use hdlloop_core::wrapper::{HarnessOptions, PinMap};
use serde::Deserialize;

use crate::driver::NullSink;
use crate::replay::replay_log;
use crate::report::render_text;
use crate::runner::{run_suite, BackendChoice, OperatorChoice, RunError, SuiteRunConfig};
use crate::session::RemoteConfig;
use crate::suite::{Suite, SuiteError};
use crate::toolchain::{select_tools, ToolConfig, ToolMode, ENV_IVERILOG, ENV_VVP};
use crate::wrapper_cmd;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_ENVIRONMENT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hdlloop", version, about = "Drive chat models through Verilog design, testbench and fix loops")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run benchmarks and write per-trial logs and a report.
    Run(RunArgs),
    /// Re-run a conversation log and check that it reproduces.
    Replay(ReplayArgs),
    /// Generate or validate the multiplexed tapeout wrapper.
    #[command(subcommand)]
    Wrapper(WrapperCommand),
    /// Serve the steering UI.
    Serve(ServeArgs),
    /// Inspect or export the benchmark suite.
    #[command(subcommand)]
    Suite(SuiteCommand),
    /// Print the design prompt of a benchmark.
    Prompt {
        benchmark: String,
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Also print the testbench prompt.
        #[arg(long)]
        all: bool,
    },
    /// Report which simulator binaries would be used.
    Tools(ToolArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ToolArgs {
    /// Where tool results come from.
    #[arg(long, value_enum, default_value_t = ToolMode::Auto)]
    pub tools: ToolMode,
    #[arg(long)]
    pub iverilog: Option<PathBuf>,
    #[arg(long)]
    pub vvp: Option<PathBuf>,
    /// Simulation time limit in seconds.
    #[arg(long)]
    pub sim_timeout: Option<u64>,
    /// Compilation time limit in seconds.
    #[arg(long)]
    pub compile_timeout: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct CommonRunArgs {
    /// Suite document; the built-in suite when absent.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// TOML file with [limits], [tools] and [remote] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackendKind::Scripted)]
    pub backend: BackendKind,
    /// Transcript directory for the scripted backend.
    #[arg(long, default_value = "transcripts")]
    pub transcripts: PathBuf,
    #[arg(long, value_enum)]
    pub operator: Option<OperatorChoice>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_messages: Option<u32>,
    #[arg(long)]
    pub max_regenerations: Option<u32>,
    #[command(flatten)]
    pub tools: ToolArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BackendKind {
    Scripted,
    Remote,
    Interactive,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonRunArgs,
    /// Benchmarks to run; all when absent.
    #[arg(long = "bench")]
    pub benches: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub trials: u32,
    /// Keep finished trials from an earlier run in the same directory.
    #[arg(long)]
    pub resume: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub log: PathBuf,
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[command(flatten)]
    pub tools: ToolArgs,
}

#[derive(Debug, Args)]
pub struct WrapperArgs {
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long = "bench")]
    pub benches: Vec<String>,
    /// TOML pin map; the default assignment when absent.
    #[arg(long)]
    pub pinmap: Option<PathBuf>,
    #[arg(long, default_value_t = HarnessOptions::default().seed)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum WrapperCommand {
    /// Write wrapper.v, pinout.md and the validation harness.
    Generate {
        #[command(flatten)]
        args: WrapperArgs,
        #[arg(long, default_value = "wrapper")]
        out: PathBuf,
    },
    /// Simulate the wrapper against the bare golden designs.
    Validate {
        #[command(flatten)]
        args: WrapperArgs,
        /// Also check that mis-wired variants are caught.
        #[arg(long)]
        mutations: bool,
        #[command(flatten)]
        tools: ToolArgs,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub common: CommonRunArgs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

#[derive(Debug, Subcommand)]
pub enum SuiteCommand {
    List {
        #[arg(long)]
        suite: Option<PathBuf>,
    },
    /// Write the suite document and golden files to a directory.
    Export {
        dir: PathBuf,
        #[arg(long)]
        suite: Option<PathBuf>,
    },
}

/// Optional settings file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub limits: Option<LoopLimits>,
    #[serde(default)]
    pub tools: Option<ToolsSection>,
    #[serde(default)]
    pub remote: Option<RemoteSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolsSection {
    pub iverilog: Option<PathBuf>,
    pub vvp: Option<PathBuf>,
    pub compile_timeout_secs: Option<u64>,
    pub sim_timeout_secs: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteSection {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: Option<u32>,
    pub max_attempts: Option<u32>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Environment(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Environment(_) => EXIT_ENVIRONMENT,
            _ => EXIT_FAILURE,
        }
    }
}

impl From<SuiteError> for CliError {
    fn from(e: SuiteError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match &e {
            RunError::Trial { source, .. } if source.is_environment() => CliError::Environment(e.to_string()),
            RunError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

fn remediation() -> String {
    format!(
        "Install Icarus Verilog (iverilog and vvp) and put it on PATH, or point {ENV_IVERILOG} and {ENV_VVP} at the binaries. \
         Runs over transcripts that carry recorded tool results work without them (--tools recorded)."
    )
}

pub fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1).unwrap_or(0);
        CliError::Usage(format!("{}, line {line}: {}", path.display(), e.message()))
    })
}

fn load_suite(path: &Option<PathBuf>) -> Result<Suite, CliError> {
    Ok(match path {
        Some(p) => Suite::load(p)?,
        None => Suite::builtin(),
    })
}

fn tool_config(args: &ToolArgs, file: Option<&ToolsSection>) -> ToolConfig {
    let mut c = ToolConfig::default();
    if let Some(f) = file {
        c.iverilog = f.iverilog.clone();
        c.vvp = f.vvp.clone();
        if let Some(s) = f.compile_timeout_secs {
            c.compile_timeout = Duration::from_secs(s);
        }
        if let Some(s) = f.sim_timeout_secs {
            c.sim_timeout = Duration::from_secs(s);
        }
    }
    if args.iverilog.is_some() {
        c.iverilog = args.iverilog.clone();
    }
    if args.vvp.is_some() {
        c.vvp = args.vvp.clone();
    }
    if let Some(s) = args.compile_timeout {
        c.compile_timeout = Duration::from_secs(s);
    }
    if let Some(s) = args.sim_timeout {
        c.sim_timeout = Duration::from_secs(s);
    }
    c
}

fn run_config(common: &CommonRunArgs, trials: u32, resume: bool, jobs: usize) -> Result<SuiteRunConfig, CliError> {
    let file = match &common.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let mut limits = file.limits.unwrap_or_default();
    if let Some(n) = common.max_messages {
        limits.max_user_messages = n;
    }
    if let Some(n) = common.max_regenerations {
        limits.max_regenerations = n;
    }
    limits.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let backend = match common.backend {
        BackendKind::Scripted => BackendChoice::Scripted(common.transcripts.clone()),
        BackendKind::Interactive => BackendChoice::Interactive,
        BackendKind::Remote => {
            let r = file.remote.unwrap_or_default();
            let mut rc = RemoteConfig::default();
            if let Some(v) = common.endpoint.clone().or(r.endpoint) {
                rc.endpoint = v;
            }
            if let Some(v) = common.model.clone().or(r.model) {
                rc.model = v;
            }
            if let Some(v) = common.api_key_env.clone().or(r.api_key_env) {
                rc.api_key_env = v;
            }
            rc.temperature = common.temperature.or(r.temperature);
            rc.top_p = r.top_p;
            rc.max_tokens = r.max_tokens;
            if let Some(n) = r.max_attempts {
                rc.max_attempts = n.max(1);
            }
            BackendChoice::Remote(rc)
        }
    };
    let operator = common.operator.unwrap_or(match backend {
        BackendChoice::Scripted(_) => OperatorChoice::Transcript,
        _ => OperatorChoice::Terminal,
    });
    if operator == OperatorChoice::Transcript && !matches!(backend, BackendChoice::Scripted(_)) {
        return Err(CliError::Usage("--operator transcript needs the scripted backend".into()));
    }
    Ok(SuiteRunConfig {
        out_dir: common.out.clone(),
        trials,
        limits,
        tool_mode: common.tools.tools,
        tools: tool_config(&common.tools, file.tools.as_ref()),
        backend,
        operator,
        resume,
        jobs,
    })
}

fn cmd_run(args: &RunArgs) -> Result<i32, CliError> {
    let mut suite = load_suite(&args.common.suite)?;
    if !args.benches.is_empty() {
        suite = suite.subset(&args.benches)?;
    }
    let cfg = run_config(&args.common, args.trials, args.resume, args.jobs)?;
    let report = run_suite(&suite, &cfg, &NullSink)?;
    print!("{}", render_text(&report));
    println!("\nWrote logs and reports under {}", cfg.out_dir.display());
    let skipped: Vec<&ReportRow> = report.rows.iter().filter(|r| matches!(r, ReportRow::SkippedEnv { .. })).collect();
    if !skipped.is_empty() {
        for r in &skipped {
            if let ReportRow::SkippedEnv { benchmark_id, trial_label, message } = r {
                eprintln!("skipped {benchmark_id} {trial_label}: {message}");
            }
        }
        eprintln!("{}", remediation());
        return Ok(EXIT_ENVIRONMENT);
    }
    Ok(EXIT_OK)
}

fn cmd_replay(args: &ReplayArgs) -> Result<i32, CliError> {
    let suite = load_suite(&args.suite)?;
    let tools = tool_config(&args.tools, None);
    let report = replay_log(&args.log, &suite, args.tools.tools, &tools, &NullSink).map_err(|e| {
        if e.is_environment() {
            CliError::Environment(format!("{e}\n{}", remediation()))
        } else {
            CliError::Failed(e.to_string())
        }
    })?;
    if report.reproduced() {
        let o = report.replayed.as_ref().map(|o| o.terminal.to_string()).unwrap_or_default();
        println!("reproduced: outcome {o} (tool results: {})", report.tool_kind);
        Ok(EXIT_OK)
    } else {
        println!("NOT reproduced (tool results: {}):", report.tool_kind);
        for d in &report.differences {
            println!("  {d}");
        }
        Ok(EXIT_FAILURE)
    }
}

fn wrapper_inputs(args: &WrapperArgs) -> Result<(Suite, Vec<hdlloop_core::bench::BenchmarkSpec>, PinMap), CliError> {
    let suite = load_suite(&args.suite)?;
    let benches = if args.benches.is_empty() { suite.benchmarks.clone() } else { suite.subset(&args.benches)?.benchmarks };
    let pinmap = match &args.pinmap {
        Some(p) => wrapper_cmd::load_pinmap(p).map_err(|e| CliError::Usage(e.to_string()))?,
        None => PinMap::default(),
    };
    Ok((suite, benches, pinmap))
}

fn cmd_wrapper(cmd: &WrapperCommand) -> Result<i32, CliError> {
    match cmd {
        WrapperCommand::Generate { args, out } => {
            let (_, benches, pinmap) = wrapper_inputs(args)?;
            let w = wrapper_cmd::generate(&benches, &pinmap).map_err(|e| CliError::Usage(e.to_string()))?;
            let opts = HarnessOptions { seed: args.seed, ..HarnessOptions::default() };
            wrapper_cmd::write_wrapper(out, &w, &benches, &opts).map_err(|e| CliError::Failed(e.to_string()))?;
            print!("{}", w.pinout);
            println!("\nWrote {} under {}", wrapper_cmd::WRAPPER_FILE, out.display());
            Ok(EXIT_OK)
        }
        WrapperCommand::Validate { args, mutations, tools } => {
            let (suite, benches, pinmap) = wrapper_inputs(args)?;
            let w = wrapper_cmd::generate(&benches, &pinmap).map_err(|e| CliError::Usage(e.to_string()))?;
            let opts = HarnessOptions { seed: args.seed, ..HarnessOptions::default() };
            let runner = select_tools(ToolMode::Live, &tool_config(tools, None), Vec::new())
                .map_err(|e| CliError::Environment(format!("{e}\n{}", remediation())))?;
            let env = |e: wrapper_cmd::WrapperCmdError| {
                if e.is_environment() {
                    CliError::Environment(e.to_string())
                } else {
                    CliError::Failed(e.to_string())
                }
            };
            let report = wrapper_cmd::validate(&suite, &benches, &w, &opts, runner.as_ref()).map_err(env)?;
            for (sel, s) in report.selects.iter().enumerate() {
                println!("select {sel}: {s:?}");
            }
            let mut ok = report.ok();
            println!("wrapper {}", if ok { "matches the bare designs" } else { "DIFFERS from the bare designs" });
            if *mutations {
                for m in wrapper_cmd::mutation_check(&suite, &benches, &w, &opts, runner.as_ref()).map_err(env)? {
                    println!("mutation `{}`: {}", m.name, if m.detected { "detected" } else { "NOT detected" });
                    ok &= m.detected;
                }
            }
            Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}

fn cmd_serve(args: &ServeArgs) -> Result<i32, CliError> {
    let suite = load_suite(&args.common.suite)?;
    let cfg = run_config(&args.common, 1, false, 1)?;
    let state = crate::serve::AppState::new(suite, cfg);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Failed(e.to_string()))?;
    rt.block_on(crate::serve::serve(args.addr, state)).map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(EXIT_OK)
}

fn cmd_suite(cmd: &SuiteCommand) -> Result<i32, CliError> {
    match cmd {
        SuiteCommand::List { suite } => {
            for b in load_suite(suite)?.benchmarks {
                println!("{:<16} {}", b.id, b.title);
            }
        }
        SuiteCommand::Export { dir, suite } => {
            load_suite(suite)?.export(dir)?;
            println!("exported to {}", dir.display());
        }
    }
    Ok(EXIT_OK)
}

fn cmd_tools(args: &ToolArgs) -> Result<i32, CliError> {
    match select_tools(ToolMode::Live, &tool_config(args, None), Vec::new()) {
        Ok(t) => {
            for (k, v) in t.versions() {
                println!("{k}: {v}");
            }
            Ok(EXIT_OK)
        }
        Err(e) => Err(CliError::Environment(format!("{e}\n{}", remediation()))),
    }
}

pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Wrapper(c) => cmd_wrapper(c),
        Command::Serve(a) => cmd_serve(a),
        Command::Suite(c) => cmd_suite(c),
        Command::Prompt { benchmark, suite, all } => {
            let s = load_suite(suite)?;
            let spec = s.get(benchmark)?;
            println!("{}", render_design_prompt(spec).map_err(|e| CliError::Usage(e.to_string()))?);
            if *all {
                println!("\n{TESTBENCH_PROMPT}");
            }
            Ok(EXIT_OK)
        }
        Command::Tools(a) => cmd_tools(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with_args(["hdlloop", "no-such-command"]), EXIT_FAILURE);
        assert_eq!(main_with_args(["hdlloop", "run", "--trials", "x"]), EXIT_FAILURE);
    }

    #[test]
    fn config_file_errors_name_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[limits]\nmax_regenerations = 5\nbogus = 1\n").unwrap();
        match load_config(&p) {
            Err(CliError::Usage(m)) => assert!(m.contains("line 2") || m.contains("line 3"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prompt_command() {
        assert_eq!(main_with_args(["hdlloop", "prompt", "shift_register"]), EXIT_OK);
        assert_eq!(main_with_args(["hdlloop", "prompt", "nope"]), EXIT_FAILURE);
    }
}
