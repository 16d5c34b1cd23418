//! Terminal classifications, per-trial outcomes and suite totals.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Feedback ladder rungs, in escalation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeedbackLevel {
    TF,
    SHF,
    MHF,
    AHF,
}

impl FeedbackLevel {
    pub const ALL: [FeedbackLevel; 4] = [FeedbackLevel::TF, FeedbackLevel::SHF, FeedbackLevel::MHF, FeedbackLevel::AHF];

    pub fn next(self) -> Option<FeedbackLevel> {
        match self {
            FeedbackLevel::TF => Some(FeedbackLevel::SHF),
            FeedbackLevel::SHF => Some(FeedbackLevel::MHF),
            FeedbackLevel::MHF => Some(FeedbackLevel::AHF),
            FeedbackLevel::AHF => None,
        }
    }

    pub fn is_human(self) -> bool {
        self != FeedbackLevel::TF
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackLevel::TF => "TF",
            FeedbackLevel::SHF => "SHF",
            FeedbackLevel::MHF => "MHF",
            FeedbackLevel::AHF => "AHF",
        }
    }
}

impl fmt::Display for FeedbackLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TerminalClass {
    NFN,
    TF,
    SHF,
    MHF,
    AHF,
    FAIL,
}

impl TerminalClass {
    pub const ALL: [TerminalClass; 6] =
        [TerminalClass::NFN, TerminalClass::TF, TerminalClass::SHF, TerminalClass::MHF, TerminalClass::AHF, TerminalClass::FAIL];

    /// Success class for a run that ended at `level` (none means no feedback).
    pub fn success_at(level: Option<FeedbackLevel>) -> Self {
        match level {
            None => TerminalClass::NFN,
            Some(FeedbackLevel::TF) => TerminalClass::TF,
            Some(FeedbackLevel::SHF) => TerminalClass::SHF,
            Some(FeedbackLevel::MHF) => TerminalClass::MHF,
            Some(FeedbackLevel::AHF) => TerminalClass::AHF,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TerminalClass::NFN => "NFN",
            TerminalClass::TF => "TF",
            TerminalClass::SHF => "SHF",
            TerminalClass::MHF => "MHF",
            TerminalClass::AHF => "AHF",
            TerminalClass::FAIL => "FAIL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        TerminalClass::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for TerminalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a run ended in FAIL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    RegenerationsExhausted,
    MessageCap,
    FeedbackExhausted,
    OperatorAbort(AbortReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    WroteHdl,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub benchmark_id: String,
    pub trial_label: String,
    pub terminal: TerminalClass,
    /// Absent exactly when `terminal` is FAIL.
    pub compliant: Option<bool>,
    pub user_messages: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compliance_evidence: Vec<String>,
}

impl Outcome {
    pub fn is_consistent(&self) -> bool {
        (self.terminal == TerminalClass::FAIL) == self.compliant.is_none()
    }
}

/// One report row: a finished trial, or one the harness could not run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReportRow {
    Completed(Outcome),
    SkippedEnv { benchmark_id: String, trial_label: String, message: String },
}

impl ReportRow {
    pub fn benchmark_id(&self) -> &str {
        match self {
            ReportRow::Completed(o) => &o.benchmark_id,
            ReportRow::SkippedEnv { benchmark_id, .. } => benchmark_id,
        }
    }

    pub fn trial_label(&self) -> &str {
        match self {
            ReportRow::Completed(o) => &o.trial_label,
            ReportRow::SkippedEnv { trial_label, .. } => trial_label,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub backend: String,
    pub model: Option<String>,
    pub temperature: Option<String>,
    #[serde(default)]
    pub sampling: BTreeMap<String, String>,
    pub started: Option<String>,
    pub finished: Option<String>,
    #[serde(default)]
    pub tool_versions: BTreeMap<String, String>,
    pub fix_output_line_limit: usize,
    pub trials: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    /// Count per terminal class, keyed by its label.
    pub by_class: BTreeMap<String, u32>,
    pub passed: u32,
    pub compliant: u32,
    pub skipped_env: u32,
    /// Compliant passes over all passes, in parts per thousand (0 when none passed).
    pub compliance_permille: u32,
}

impl Totals {
    pub fn from_rows(rows: &[ReportRow]) -> Self {
        let mut t = Totals::default();
        for c in TerminalClass::ALL {
            t.by_class.insert(String::from(c.as_str()), 0);
        }
        for row in rows {
            match row {
                ReportRow::Completed(o) => {
                    *t.by_class.entry(String::from(o.terminal.as_str())).or_default() += 1;
                    if o.terminal != TerminalClass::FAIL {
                        t.passed += 1;
                    }
                    if o.compliant == Some(true) {
                        t.compliant += 1;
                    }
                }
                ReportRow::SkippedEnv { .. } => t.skipped_env += 1,
            }
        }
        t.compliance_permille = (t.compliant * 1000).checked_div(t.passed).unwrap_or(0);
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub metadata: RunMetadata,
    pub rows: Vec<ReportRow>,
    pub totals: Totals,
}

impl SuiteReport {
    pub fn new(metadata: RunMetadata, rows: Vec<ReportRow>) -> Self {
        let totals = Totals::from_rows(&rows);
        SuiteReport { metadata, rows, totals }
    }

    pub fn totals_consistent(&self) -> bool {
        self.totals == Totals::from_rows(&self.rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(c: TerminalClass, compliant: Option<bool>) -> ReportRow {
        ReportRow::Completed(Outcome {
            benchmark_id: "b".into(),
            trial_label: "T1".into(),
            terminal: c,
            compliant,
            user_messages: 3,
            compliance_evidence: Vec::new(),
        })
    }

    #[test]
    fn totals() {
        let rows = [
            row(TerminalClass::NFN, Some(true)),
            row(TerminalClass::TF, Some(false)),
            row(TerminalClass::FAIL, None),
            ReportRow::SkippedEnv { benchmark_id: "b".into(), trial_label: "T2".into(), message: "no iverilog".into() },
        ];
        let r = SuiteReport::new(RunMetadata::default(), rows.to_vec());
        assert_eq!(r.totals.passed, 2);
        assert_eq!(r.totals.compliant, 1);
        assert_eq!(r.totals.compliance_permille, 500);
        assert_eq!(r.totals.skipped_env, 1);
        assert_eq!(r.totals.by_class["FAIL"], 1);
        assert!(r.totals_consistent());
    }

    #[test]
    fn ladder() {
        assert_eq!(FeedbackLevel::TF.next(), Some(FeedbackLevel::SHF));
        assert_eq!(FeedbackLevel::AHF.next(), None);
        assert!(FeedbackLevel::TF < FeedbackLevel::AHF);
        assert_eq!(TerminalClass::success_at(None), TerminalClass::NFN);
        assert_eq!(TerminalClass::parse("MHF"), Some(TerminalClass::MHF));
    }
}
