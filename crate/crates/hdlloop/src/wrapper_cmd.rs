//! Generating the multiplexed top-level wrapper and checking it against the
//! bare golden designs in simulation.

use std::fs;
use std::path::Path;

use hdlloop_core::bench::BenchmarkSpec;
use hdlloop_core::verdict::classify_compile;
use hdlloop_core::wrapper::{build_harness, generate_wrapper, parse_harness_output, with_routing, HarnessOptions, PinMap, ValidationReport, Wrapper, WrapperError};
use serde::Serialize;

use crate::suite::Suite;
use crate::toolchain::{SourceFile, ToolError, ToolRunner};

pub const WRAPPER_FILE: &str = "wrapper.v";
pub const PINOUT_FILE: &str = "pinout.md";
pub const HARNESS_FILE: &str = "wrapper_harness.v";

#[derive(Debug, thiserror::Error)]
pub enum WrapperCmdError {
    #[error(transparent)]
    Wrapper(#[from] WrapperError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error("harness did not compile:\n{0}")]
    HarnessCompile(String),
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("pin map: {0}")]
    PinMap(String),
}

impl WrapperCmdError {
    pub fn is_environment(&self) -> bool {
        matches!(self, WrapperCmdError::Tool(e) if e.is_environment())
    }
}

pub fn load_pinmap(path: &Path) -> Result<PinMap, WrapperCmdError> {
    let text = fs::read_to_string(path).map_err(|source| WrapperCmdError::Io { path: path.to_path_buf(), source })?;
    let pm: PinMap = toml::from_str(&text).map_err(|e| WrapperCmdError::PinMap(e.to_string()))?;
    pm.validate()?;
    Ok(pm)
}

/// Writes the wrapper, its pinout and the validation harness into `dir`.
pub fn write_wrapper(dir: &Path, wrapper: &Wrapper, benchmarks: &[BenchmarkSpec], opts: &HarnessOptions) -> Result<(), WrapperCmdError> {
    fs::create_dir_all(dir).map_err(|source| WrapperCmdError::Io { path: dir.to_path_buf(), source })?;
    let harness = build_harness(wrapper, benchmarks, opts);
    for (name, text) in [(WRAPPER_FILE, &wrapper.source), (PINOUT_FILE, &wrapper.pinout), (HARNESS_FILE, &harness.source)] {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|source| WrapperCmdError::Io { path: p, source })?;
    }
    Ok(())
}

/// Simulates `wrapper_source` against a harness built from `reference`,
/// which fixes the expected routing.
pub fn validate_source(
    suite: &Suite,
    benchmarks: &[BenchmarkSpec],
    reference: &Wrapper,
    wrapper_source: &str,
    opts: &HarnessOptions,
    tools: &dyn ToolRunner,
) -> Result<ValidationReport, WrapperCmdError> {
    let harness = build_harness(reference, benchmarks, opts);
    let mut sources = vec![SourceFile::new(WRAPPER_FILE, wrapper_source)];
    for b in benchmarks {
        sources.push(SourceFile::new(b.golden_design.clone(), suite.golden_design(b)));
    }
    sources.push(SourceFile::new(HARNESS_FILE, harness.source));
    let compiled = tools.compile(&sources, Some(&harness.module))?;
    let verdict = classify_compile(&compiled.result);
    let Some(artifact) = compiled.artifact.filter(|_| verdict.passed) else {
        return Err(WrapperCmdError::HarnessCompile(verdict.feedback_text));
    };
    let out = tools.simulate(&artifact)?;
    Ok(parse_harness_output(&out.raw_output))
}

pub fn validate(suite: &Suite, benchmarks: &[BenchmarkSpec], wrapper: &Wrapper, opts: &HarnessOptions, tools: &dyn ToolRunner) -> Result<ValidationReport, WrapperCmdError> {
    validate_source(suite, benchmarks, wrapper, &wrapper.source, opts, tools)
}

#[derive(Debug, Clone, Serialize)]
pub struct MutationResult {
    pub name: String,
    pub detected: bool,
    pub failing_selects: Vec<u8>,
}

/// Deliberately mis-wired variants of `wrapper`. Each must be caught.
pub fn mutations(wrapper: &Wrapper) -> Vec<(String, Wrapper)> {
    let mut out = Vec::new();
    let routed: Vec<usize> = (0..8).filter(|&s| wrapper.routing[s].is_some()).collect();
    if let [a, b, ..] = routed[..] {
        if wrapper.routing[a] != wrapper.routing[b] {
            let mut r = wrapper.routing;
            r.swap(a, b);
            out.push((format!("swap selects {a} and {b}"), with_routing(wrapper, r)));
        }
    }
    if let Some(&last) = routed.last() {
        let mut r = wrapper.routing;
        r[last] = None;
        out.push((format!("disconnect select {last}"), with_routing(wrapper, r)));
    }
    if let Some(free) = (0..8).find(|&s| wrapper.routing[s].is_none()) {
        let mut r = wrapper.routing;
        r[free] = Some(0);
        out.push((format!("drive unassigned select {free}"), with_routing(wrapper, r)));
    }
    out
}

pub fn mutation_check(suite: &Suite, benchmarks: &[BenchmarkSpec], wrapper: &Wrapper, opts: &HarnessOptions, tools: &dyn ToolRunner) -> Result<Vec<MutationResult>, WrapperCmdError> {
    mutations(wrapper)
        .into_iter()
        .map(|(name, m)| {
            let r = validate_source(suite, benchmarks, wrapper, &m.source, opts, tools)?;
            Ok(MutationResult { name, detected: !r.ok(), failing_selects: r.failing_selects() })
        })
        .collect()
}

pub fn generate(benchmarks: &[BenchmarkSpec], pinmap: &PinMap) -> Result<Wrapper, WrapperCmdError> {
    pinmap.validate()?;
    Ok(generate_wrapper(benchmarks, pinmap)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_suite_mutations() {
        let s = Suite::builtin();
        let w = generate(&s.benchmarks, &PinMap::default()).unwrap();
        let m = mutations(&w);
        assert_eq!(m.len(), 2);
        assert!(m.iter().all(|(_, v)| v.source != w.source));
    }

    #[test]
    fn sparse_wrapper_has_three_mutations() {
        let s = Suite::builtin();
        let w = generate(&s.benchmarks[..3], &PinMap::default()).unwrap();
        assert_eq!(mutations(&w).len(), 3);
    }

    #[test]
    fn pinmap_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pins.toml");
        fs::write(&p, "select_bits = [5, 6, 7]\nclock_bit = 0\nshared_inputs = [1, 2, 3, 3]\n").unwrap();
        assert!(matches!(load_pinmap(&p), Err(WrapperCmdError::Wrapper(WrapperError::DuplicatePin(3)))));
    }
}
