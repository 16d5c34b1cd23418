//! Turning raw compiler and simulator output into verdicts and fingerprints.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolPhase {
    Compile,
    Simulate,
}

impl ToolPhase {
    pub fn tag(self) -> &'static str {
        match self {
            ToolPhase::Compile => "compile",
            ToolPhase::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Sorry,
    Note,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub file: String,
    pub line: Option<u32>,
    pub message: String,
    /// The output line this was parsed from, verbatim.
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileResult {
    pub exit_status: i32,
    pub raw_output: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl CompileResult {
    pub fn from_output(exit_status: i32, raw_output: String) -> Self {
        let diagnostics = raw_output.lines().filter_map(parse_diagnostic).collect();
        CompileResult { exit_status, raw_output, diagnostics }
    }

    pub fn succeeded(&self) -> bool {
        self.exit_status == 0 && !self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimResult {
    pub exit_status: i32,
    pub raw_output: String,
    pub error_lines: Vec<String>,
    pub saw_pass_banner: bool,
    pub timed_out: bool,
}

impl SimResult {
    pub fn from_output(exit_status: i32, raw_output: String, timed_out: bool, patterns: &ErrorPatterns) -> Self {
        let error_lines = raw_output.lines().filter(|l| patterns.is_error(l)).map(ToString::to_string).collect();
        let saw_pass_banner = raw_output.lines().any(|l| patterns.is_pass_banner(l));
        SimResult { exit_status, raw_output, error_lines, saw_pass_banner, timed_out }
    }
}

/// Which simulator output lines count as errors or as a pass banner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPatterns {
    /// Case-insensitive line prefixes (after leading whitespace).
    pub prefixes: Vec<String>,
    /// Case-sensitive substrings.
    pub contains: Vec<String>,
    /// Case-insensitive substrings marking a pass banner.
    pub pass_markers: Vec<String>,
}

impl Default for ErrorPatterns {
    fn default() -> Self {
        ErrorPatterns {
            prefixes: alloc::vec!["error".to_string()],
            contains: alloc::vec!["FAILED".to_string()],
            pass_markers: alloc::vec!["passed".to_string()],
        }
    }
}

impl ErrorPatterns {
    pub fn is_error(&self, line: &str) -> bool {
        let t = line.trim_start();
        let lower = t.to_ascii_lowercase();
        self.prefixes.iter().any(|p| lower.starts_with(&p.to_ascii_lowercase()))
            || self.contains.iter().any(|c| t.contains(c.as_str()))
            || parse_diagnostic(t).is_some_and(|d| d.severity == Severity::Error)
    }

    pub fn is_pass_banner(&self, line: &str) -> bool {
        let lower = line.to_ascii_lowercase();
        !self.is_error(line) && self.pass_markers.iter().any(|m| lower.contains(&m.to_ascii_lowercase()))
    }
}

/// Parses one compiler diagnostic line.
///
/// Accepts the iverilog form `file:line: [error:|warning:|sorry:] message`
/// (no keyword means error) and the `%Error: file:line:col: message` form.
pub fn parse_diagnostic(line: &str) -> Option<Diagnostic> {
    let t = line.trim();
    if let Some(rest) = t.strip_prefix('%') {
        let (head, body) = rest.split_once(": ")?;
        let severity = match head.split('-').next()? {
            "Error" => Severity::Error,
            "Warning" => Severity::Warning,
            _ => return None,
        };
        let (file, line_no, message) = split_location(body).unwrap_or((String::new(), None, body.to_string()));
        return Some(Diagnostic { severity, file, line: line_no, message, raw: line.to_string() });
    }
    let (file, line_no, rest) = split_location(t)?;
    line_no?;
    let rest = rest.trim_start();
    let lower = rest.to_ascii_lowercase();
    let (severity, message) = if lower.starts_with("error:") {
        (Severity::Error, rest[6..].trim().to_string())
    } else if lower.starts_with("warning:") {
        (Severity::Warning, rest[8..].trim().to_string())
    } else if lower.starts_with("sorry:") {
        (Severity::Sorry, rest[6..].trim().to_string())
    } else if lower.starts_with("note:") || lower.starts_with("info:") {
        (Severity::Note, rest[5..].trim().to_string())
    } else if rest.starts_with("$finish") || rest.starts_with("$stop") {
        return None;
    } else {
        (Severity::Error, rest.trim().to_string())
    };
    Some(Diagnostic { severity, file, line: line_no, message, raw: line.to_string() })
}

/// Splits `file:line[:col]: rest`.
fn split_location(s: &str) -> Option<(String, Option<u32>, String)> {
    let (loc, rest) = s.split_once(": ")?;
    let mut pieces = loc.split(':');
    let file = pieces.next()?;
    if file.is_empty() || file.contains(' ') || !file.contains('.') {
        return None;
    }
    let line: u32 = pieces.next()?.parse().ok()?;
    if let Some(col) = pieces.next() {
        col.parse::<u32>().ok()?;
    }
    if pieces.next().is_some() {
        return None;
    }
    Some((file.to_string(), Some(line), rest.to_string()))
}

/// Housekeeping lines dropped from replayed feedback.
fn is_housekeeping(line: &str) -> bool {
    let t = line.trim();
    t.is_empty()
        || t.contains("$finish called at")
        || t.contains("$stop called at")
        || t.starts_with("VCD info:")
        || t.starts_with("VCD warning:")
        || (t.starts_with("- ") && t.ends_with("Verilog $finish"))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErrorFingerprint {
    pub phase: ToolPhase,
    pub keys: Vec<String>,
}

impl ErrorFingerprint {
    pub fn empty(phase: ToolPhase) -> Self {
        ErrorFingerprint { phase, keys: Vec::new() }
    }
}

impl core::fmt::Display for ErrorFingerprint {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}[{}]", self.phase.tag(), self.keys.join(" | "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolVerdict {
    pub phase: ToolPhase,
    pub passed: bool,
    pub feedback_text: String,
    pub fingerprint: ErrorFingerprint,
    #[serde(default)]
    pub timed_out: bool,
}

pub fn classify_compile(result: &CompileResult) -> ToolVerdict {
    if result.succeeded() {
        return ToolVerdict {
            phase: ToolPhase::Compile,
            passed: true,
            feedback_text: String::new(),
            fingerprint: ErrorFingerprint::empty(ToolPhase::Compile),
            timed_out: false,
        };
    }
    let mut lines: Vec<&str> = result.diagnostics.iter().map(|d| d.raw.as_str()).collect();
    if lines.is_empty() {
        lines = result.raw_output.lines().filter(|l| !l.trim().is_empty()).collect();
    }
    ToolVerdict {
        phase: ToolPhase::Compile,
        passed: false,
        feedback_text: lines.join("\n"),
        fingerprint: fingerprint_compile(result),
        timed_out: false,
    }
}

pub fn classify_sim(result: &SimResult) -> ToolVerdict {
    let passed = result.error_lines.is_empty() && !result.timed_out && result.exit_status == 0;
    if passed {
        return ToolVerdict {
            phase: ToolPhase::Simulate,
            passed: true,
            feedback_text: String::new(),
            fingerprint: ErrorFingerprint::empty(ToolPhase::Simulate),
            timed_out: false,
        };
    }
    let feedback: Vec<&str> = result.raw_output.lines().filter(|l| !is_housekeeping(l)).collect();
    ToolVerdict {
        phase: ToolPhase::Simulate,
        passed: false,
        feedback_text: feedback.join("\n"),
        fingerprint: fingerprint_sim(result),
        timed_out: result.timed_out,
    }
}

pub fn fingerprint_compile(result: &CompileResult) -> ErrorFingerprint {
    let mut keys = Vec::new();
    for d in result.diagnostics.iter().filter(|d| d.severity == Severity::Error) {
        push_unique(&mut keys, normalize_message(&d.message));
    }
    if keys.is_empty() {
        keys.push("compile-failed".to_string());
    }
    ErrorFingerprint { phase: ToolPhase::Compile, keys }
}

pub fn fingerprint_sim(result: &SimResult) -> ErrorFingerprint {
    let mut keys = Vec::new();
    for line in &result.error_lines {
        push_unique(&mut keys, sim_line_key(line));
    }
    if result.timed_out {
        push_unique(&mut keys, "sim-timeout".to_string());
    }
    if keys.is_empty() {
        keys.push(format!("sim-exit:{}", result.exit_status));
    }
    ErrorFingerprint { phase: ToolPhase::Simulate, keys }
}

fn push_unique(keys: &mut Vec<String>, key: String) {
    if !keys.contains(&key) {
        keys.push(key);
    }
}

/// Key for a simulator error line. Reports of a numbered test case collapse
/// to `tb-case-mismatch:case-N` whatever the values printed.
pub fn sim_line_key(line: &str) -> String {
    if let Some(n) = test_case_number(line) {
        return format!("tb-case-mismatch:case-{n}");
    }
    let body = match parse_diagnostic(line) {
        Some(d) => d.message,
        None => line.to_string(),
    };
    normalize_message(&body)
}

fn test_case_number(line: &str) -> Option<u64> {
    let lower = line.to_ascii_lowercase();
    let at = lower.find("test case")?;
    let rest = lower[at + "test case".len()..].trim_start().trim_start_matches('#').trim_start();
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    let n = digits.parse().ok()?;
    let after = &rest[digits.len()..];
    (after.contains("fail") || lower.contains("error") || lower.contains("mismatch")).then_some(n)
}

/// Message skeleton: observed values, paths and digits removed, whitespace
/// collapsed.
pub fn normalize_message(msg: &str) -> String {
    let mut s = String::from(msg.trim());
    for marker in ["received", "got", "actual", "observed", "output was", "found"] {
        if let Some(at) = find_word_ci(&s, marker) {
            let cut = s[at + marker.len()..].find([',', ';', '.', ')']).map(|n| at + marker.len() + n);
            let tail = cut.map(|c| s[c..].to_string()).unwrap_or_default();
            s.truncate(at + marker.len());
            s.push_str(" <v>");
            s.push_str(&tail);
        }
    }
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        let word = if word.contains('/') || word.contains(".v") { "<path>" } else { word };
        if !out.is_empty() {
            out.push(' ');
        }
        let mut last_hash = false;
        for c in word.chars() {
            if c.is_ascii_digit() {
                if !last_hash {
                    out.push('#');
                }
                last_hash = true;
            } else {
                out.push(c);
                last_hash = false;
            }
        }
    }
    out
}

fn find_word_ci(s: &str, word: &str) -> Option<usize> {
    let lower = s.to_ascii_lowercase();
    let mut from = 0;
    while let Some(i) = lower[from..].find(word) {
        let at = from + i;
        let before_ok = at == 0 || !lower.as_bytes()[at - 1].is_ascii_alphanumeric();
        let end = at + word.len();
        let after_ok = end >= lower.len() || !lower.as_bytes()[end].is_ascii_alphanumeric();
        if before_ok && after_ok {
            return Some(at);
        }
        from = at + 1;
    }
    None
}
