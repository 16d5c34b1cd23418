//! Compile and simulate through an iverilog-compatible toolchain, or answer
//! from recorded results.

use std::collections::BTreeMap;
use std::env;
use std::ffi::OsString;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use hdlloop_core::verdict::{classify_compile, classify_sim, CompileResult, ErrorPatterns, SimResult, ToolPhase, ToolVerdict};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

pub const ENV_IVERILOG: &str = "HDLLOOP_IVERILOG";
pub const ENV_VVP: &str = "HDLLOOP_VVP";
pub const ARTIFACT_NAME: &str = "sim.vvp";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub name: String,
    pub text: String,
}

impl SourceFile {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        SourceFile { name: name.into(), text: text.into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("{tool} not found ({hint})")]
    Missing { tool: &'static str, hint: String },
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("{phase} step exceeded {after:?}")]
    Timeout { phase: &'static str, after: Duration },
    #[error("no recorded {phase} result for sources {key}")]
    CassetteMiss { phase: &'static str, key: String },
    #[error("tool IO: {0}")]
    Io(#[from] std::io::Error),
}

impl ToolError {
    /// Problems with the harness environment rather than with the design.
    pub fn is_environment(&self) -> bool {
        !matches!(self, ToolError::Precondition(_))
    }
}

/// Hex digest identifying a build: top module plus every source name and text.
pub fn source_key(sources: &[SourceFile], top: Option<&str>) -> String {
    let mut h = Sha256::new();
    h.update(top.unwrap_or("").as_bytes());
    h.update([0]);
    for s in sources {
        h.update(s.name.as_bytes());
        h.update([0]);
        h.update(s.text.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

/// A compiled simulation, kept alive until simulated.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub key: String,
    pub path: PathBuf,
    _dir: Option<Arc<TempDir>>,
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub result: CompileResult,
    pub artifact: Option<Artifact>,
    pub command: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOutput {
    pub exit_status: i32,
    pub raw_output: String,
    pub timed_out: bool,
    pub command: Vec<String>,
}

/// One recorded tool invocation, enough to answer it again without tools.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolRecord {
    pub key: String,
    pub phase: ToolPhase,
    pub exit_status: i32,
    pub output: String,
    #[serde(default)]
    pub timed_out: bool,
    #[serde(default)]
    pub command: Vec<String>,
}

pub trait ToolRunner: Send + Sync {
    fn compile(&self, sources: &[SourceFile], top: Option<&str>) -> Result<Compiled, ToolError>;
    fn simulate(&self, artifact: &Artifact) -> Result<SimOutput, ToolError>;
    fn versions(&self) -> BTreeMap<String, String>;
    fn kind(&self) -> &'static str;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolConfig {
    pub iverilog: Option<PathBuf>,
    pub vvp: Option<PathBuf>,
    pub compile_timeout: Duration,
    pub sim_timeout: Duration,
    pub patterns: ErrorPatterns,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig {
            iverilog: None,
            vvp: None,
            compile_timeout: Duration::from_secs(120),
            sim_timeout: Duration::from_secs(10),
            patterns: ErrorPatterns::default(),
        }
    }
}

fn search_path(program: &str) -> Option<PathBuf> {
    let paths = env::var_os("PATH")?;
    env::split_paths(&paths).map(|d| d.join(program)).find(|p| p.is_file())
}

fn discover(configured: Option<&Path>, var: &str, program: &'static str) -> Result<PathBuf, ToolError> {
    if let Some(p) = configured {
        return if p.is_file() {
            Ok(p.to_path_buf())
        } else {
            Err(ToolError::Missing { tool: program, hint: format!("configured path {} does not exist", p.display()) })
        };
    }
    if let Some(v) = env::var_os(var).filter(|v| !v.is_empty()) {
        let p = PathBuf::from(v);
        return if p.is_file() {
            Ok(p)
        } else {
            Err(ToolError::Missing { tool: program, hint: format!("{var}={} does not exist", p.display()) })
        };
    }
    search_path(program).ok_or_else(|| ToolError::Missing {
        tool: program,
        hint: format!("install Icarus Verilog, put {program} on PATH or set {var}"),
    })
}

/// Runs `cmd`, killing it after `timeout`. Returns exit status (-1 when
/// killed or signalled), stdout followed by stderr, and whether it timed out.
fn run_bounded(mut cmd: Command, timeout: Duration) -> Result<(i32, String, bool), ToolError> {
    cmd.stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped());
    let mut child = cmd.spawn()?;
    let mut out = child.stdout.take().expect("piped");
    let mut err = child.stderr.take().expect("piped");
    let t_out = thread::spawn(move || {
        let mut b = Vec::new();
        let _ = out.read_to_end(&mut b);
        b
    });
    let t_err = thread::spawn(move || {
        let mut b = Vec::new();
        let _ = err.read_to_end(&mut b);
        b
    });
    let start = Instant::now();
    let mut timed_out = false;
    let status = loop {
        if let Some(s) = child.try_wait()? {
            break s;
        }
        if start.elapsed() >= timeout {
            timed_out = true;
            let _ = child.kill();
            break child.wait()?;
        }
        thread::sleep(Duration::from_millis(5));
    };
    let mut bytes = t_out.join().unwrap_or_default();
    bytes.extend(t_err.join().unwrap_or_default());
    Ok((status.code().unwrap_or(-1), String::from_utf8_lossy(&bytes).into_owned(), timed_out))
}

fn command_line(program: &Path, args: &[OsString]) -> Vec<String> {
    std::iter::once(program.display().to_string()).chain(args.iter().map(|a| a.to_string_lossy().into_owned())).collect()
}

/// The real toolchain. Every build gets its own scratch directory.
#[derive(Debug, Clone)]
pub struct Icarus {
    pub iverilog: PathBuf,
    pub vvp: PathBuf,
    pub config: ToolConfig,
}

impl Icarus {
    pub fn discover(config: &ToolConfig) -> Result<Icarus, ToolError> {
        let iverilog = discover(config.iverilog.as_deref(), ENV_IVERILOG, "iverilog")?;
        let vvp = discover(config.vvp.as_deref(), ENV_VVP, "vvp")?;
        Ok(Icarus { iverilog, vvp, config: config.clone() })
    }
}

impl ToolRunner for Icarus {
    fn compile(&self, sources: &[SourceFile], top: Option<&str>) -> Result<Compiled, ToolError> {
        if sources.is_empty() {
            return Err(ToolError::Precondition("no source files to compile".into()));
        }
        let dir = tempfile::Builder::new().prefix("hdlloop-").tempdir()?;
        let mut args: Vec<OsString> = vec!["-g2001".into(), "-o".into(), ARTIFACT_NAME.into()];
        if let Some(t) = top {
            args.push("-s".into());
            args.push(t.into());
        }
        for s in sources {
            fs::write(dir.path().join(&s.name), &s.text)?;
            args.push(s.name.clone().into());
        }
        let command = command_line(&self.iverilog, &args);
        tracing::debug!(command = ?command, "compile");
        let mut cmd = Command::new(&self.iverilog);
        cmd.args(&args).current_dir(dir.path());
        let (exit, output, timed_out) = run_bounded(cmd, self.config.compile_timeout)?;
        if timed_out {
            return Err(ToolError::Timeout { phase: "compile", after: self.config.compile_timeout });
        }
        let result = CompileResult::from_output(exit, output);
        let path = dir.path().join(ARTIFACT_NAME);
        let dir = Arc::new(dir);
        let artifact = result.succeeded().then(|| Artifact { key: source_key(sources, top), path, _dir: Some(dir) });
        Ok(Compiled { result, artifact, command })
    }

    fn simulate(&self, artifact: &Artifact) -> Result<SimOutput, ToolError> {
        let args: Vec<OsString> = vec!["-n".into(), ARTIFACT_NAME.into()];
        let command = command_line(&self.vvp, &args);
        let mut cmd = Command::new(&self.vvp);
        cmd.args(&args).current_dir(artifact.path.parent().unwrap_or(Path::new(".")));
        let (exit_status, raw_output, timed_out) = run_bounded(cmd, self.config.sim_timeout)?;
        Ok(SimOutput { exit_status, raw_output, timed_out, command })
    }

    fn versions(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let mut cmd = Command::new(&self.iverilog);
        cmd.arg("-V");
        if let Ok((_, text, _)) = run_bounded(cmd, Duration::from_secs(10)) {
            if let Some(first) = text.lines().next() {
                out.insert("iverilog".to_string(), first.trim().to_string());
            }
        }
        out
    }

    fn kind(&self) -> &'static str {
        "live"
    }
}

/// Answers from recorded results, keyed by the sources of each build.
#[derive(Debug, Clone, Default)]
pub struct Cassette {
    records: BTreeMap<(ToolPhase, String), ToolRecord>,
}

impl Cassette {
    pub fn new(records: impl IntoIterator<Item = ToolRecord>) -> Self {
        let mut c = Cassette::default();
        for r in records {
            c.records.insert((r.phase, r.key.clone()), r);
        }
        c
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }
}

impl ToolRunner for Cassette {
    fn compile(&self, sources: &[SourceFile], top: Option<&str>) -> Result<Compiled, ToolError> {
        if sources.is_empty() {
            return Err(ToolError::Precondition("no source files to compile".into()));
        }
        let key = source_key(sources, top);
        let r = self
            .records
            .get(&(ToolPhase::Compile, key.clone()))
            .ok_or_else(|| ToolError::CassetteMiss { phase: "compile", key: key.clone() })?;
        let result = CompileResult::from_output(r.exit_status, r.output.clone());
        let artifact = result.succeeded().then(|| Artifact { key, path: PathBuf::from(ARTIFACT_NAME), _dir: None });
        Ok(Compiled { result, artifact, command: r.command.clone() })
    }

    fn simulate(&self, artifact: &Artifact) -> Result<SimOutput, ToolError> {
        let r = self
            .records
            .get(&(ToolPhase::Simulate, artifact.key.clone()))
            .ok_or_else(|| ToolError::CassetteMiss { phase: "simulate", key: artifact.key.clone() })?;
        Ok(SimOutput { exit_status: r.exit_status, raw_output: r.output.clone(), timed_out: r.timed_out, command: r.command.clone() })
    }

    fn versions(&self) -> BTreeMap<String, String> {
        BTreeMap::from([("iverilog".to_string(), "recorded".to_string())])
    }

    fn kind(&self) -> &'static str {
        "recorded"
    }
}

/// Compile-then-simulate outcome for one source set, with records of both steps.
#[derive(Debug, Clone)]
pub struct PairRun {
    pub compile: ToolVerdict,
    pub sim: Option<(SimResult, ToolVerdict)>,
    pub records: Vec<ToolRecord>,
}

impl PairRun {
    pub fn passed(&self) -> bool {
        self.compile.passed && self.sim.as_ref().is_some_and(|(_, v)| v.passed)
    }

    /// Error lines explaining a failure.
    pub fn evidence(&self) -> Vec<String> {
        if !self.compile.passed {
            return self.compile.feedback_text.lines().map(String::from).collect();
        }
        match &self.sim {
            Some((r, v)) if !v.passed => {
                let mut e = r.error_lines.clone();
                if r.timed_out {
                    e.push("simulation timed out".into());
                }
                if e.is_empty() {
                    e.push(format!("simulator exited with status {}", r.exit_status));
                }
                e
            }
            _ => Vec::new(),
        }
    }
}

pub fn compile_record(sources: &[SourceFile], top: Option<&str>, c: &Compiled) -> ToolRecord {
    ToolRecord {
        key: source_key(sources, top),
        phase: ToolPhase::Compile,
        exit_status: c.result.exit_status,
        output: c.result.raw_output.clone(),
        timed_out: false,
        command: c.command.clone(),
    }
}

pub fn sim_record(artifact: &Artifact, s: &SimOutput) -> ToolRecord {
    ToolRecord {
        key: artifact.key.clone(),
        phase: ToolPhase::Simulate,
        exit_status: s.exit_status,
        output: s.raw_output.clone(),
        timed_out: s.timed_out,
        command: s.command.clone(),
    }
}

pub fn run_pair(tools: &dyn ToolRunner, sources: &[SourceFile], top: Option<&str>, patterns: &ErrorPatterns) -> Result<PairRun, ToolError> {
    let compiled = tools.compile(sources, top)?;
    let mut records = vec![compile_record(sources, top, &compiled)];
    let compile = classify_compile(&compiled.result);
    let sim = match (&compiled.artifact, compile.passed) {
        (Some(a), true) => {
            let out = tools.simulate(a)?;
            records.push(sim_record(a, &out));
            let r = SimResult::from_output(out.exit_status, out.raw_output, out.timed_out, patterns);
            let v = classify_sim(&r);
            Some((r, v))
        }
        _ => None,
    };
    Ok(PairRun { compile, sim, records })
}

/// How tools are chosen for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ToolMode {
    /// Live tools when found, else recorded results when the transcript has them.
    #[default]
    Auto,
    Live,
    Recorded,
}

/// Picks the runner for `mode`. `records` are the tool records available
/// from transcripts.
pub fn select_tools(mode: ToolMode, config: &ToolConfig, records: Vec<ToolRecord>) -> Result<Arc<dyn ToolRunner>, ToolError> {
    match mode {
        ToolMode::Live => Ok(Arc::new(Icarus::discover(config)?)),
        ToolMode::Recorded => Ok(Arc::new(Cassette::new(records))),
        ToolMode::Auto => match Icarus::discover(config) {
            Ok(i) => Ok(Arc::new(i)),
            Err(e) if records.is_empty() => Err(e),
            Err(e) => {
                tracing::info!("{e}; answering tool steps from recorded results");
                Ok(Arc::new(Cassette::new(records)))
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_depends_on_names_text_and_top() {
        let a = [SourceFile::new("design.v", "module m; endmodule")];
        let b = [SourceFile::new("other.v", "module m; endmodule")];
        assert_ne!(source_key(&a, None), source_key(&b, None));
        assert_ne!(source_key(&a, None), source_key(&a, Some("m")));
        assert_eq!(source_key(&a, None).len(), 64);
    }

    #[test]
    fn cassette_round_trip() {
        let src = [SourceFile::new("design.v", "x")];
        let key = source_key(&src, None);
        let c = Cassette::new([
            ToolRecord { key: key.clone(), phase: ToolPhase::Compile, exit_status: 0, output: String::new(), timed_out: false, command: vec![] },
            ToolRecord { key, phase: ToolPhase::Simulate, exit_status: 0, output: "All test cases passed!\n".into(), timed_out: false, command: vec![] },
        ]);
        let run = run_pair(&c, &src, None, &ErrorPatterns::default()).unwrap();
        assert!(run.passed());
        assert_eq!(run.records.len(), 2);
        let other = [SourceFile::new("design.v", "y")];
        assert!(matches!(c.compile(&other, None), Err(ToolError::CassetteMiss { .. })));
        assert!(matches!(c.compile(&[], None), Err(ToolError::Precondition(_))));
    }

    #[test]
    fn missing_configured_tool_is_environment_error() {
        let cfg = ToolConfig { iverilog: Some("/nonexistent/iverilog".into()), ..ToolConfig::default() };
        let e = Icarus::discover(&cfg).unwrap_err();
        assert!(e.is_environment());
        assert!(e.to_string().contains("iverilog"));
    }

    #[test]
    fn bounded_run_kills_hung_process() {
        let mut cmd = Command::new("sleep");
        cmd.arg("5");
        let start = Instant::now();
        let (_, _, timed_out) = run_bounded(cmd, Duration::from_millis(100)).unwrap();
        assert!(timed_out);
        assert!(start.elapsed() < Duration::from_secs(3));
    }
}
