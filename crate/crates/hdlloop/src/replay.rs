//! Re-running a conversation log and comparing the result with what it records.

use std::path::Path;

use hdlloop_core::conversation::{ChatMessage, Conversation};
use hdlloop_core::engine::LoopLimits;
use hdlloop_core::outcome::Outcome;

use crate::driver::{run_conversation, DriverError, EventSink, RunSetup, ScriptedOperator};
use crate::record::{conversation_from_records, read_records, LogError, LogRecord, Transcript};
use crate::session::{ScriptedBackend, Session, SessionMeta};
use crate::suite::{Suite, SuiteError};
use crate::toolchain::{select_tools, ToolConfig, ToolError, ToolMode};

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("log has no header record")]
    NoHeader,
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Tools(#[from] ToolError),
    #[error(transparent)]
    Driver(DriverError),
}

impl ReplayError {
    pub fn is_environment(&self) -> bool {
        match self {
            ReplayError::Tools(e) => e.is_environment(),
            ReplayError::Driver(e) => e.is_environment(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub recorded: Option<Outcome>,
    pub replayed: Option<Outcome>,
    /// Human-readable differences; empty when the log reproduces.
    pub differences: Vec<String>,
    pub tool_kind: &'static str,
}

impl ReplayReport {
    pub fn reproduced(&self) -> bool {
        self.differences.is_empty()
    }
}

/// The fields of a message that replay must reproduce. Timestamps are not compared.
fn message_key(m: &ChatMessage) -> (String, String, String, Option<String>, bool) {
    (
        format!("{:?}", m.role),
        format!("{:?}", m.phase),
        m.content.clone(),
        m.feedback_level.map(|l| l.to_string()),
        m.superseded,
    )
}

pub fn compare(recorded: &Conversation, replayed: &Conversation) -> Vec<String> {
    let mut d = Vec::new();
    if recorded.messages.len() != replayed.messages.len() {
        d.push(format!("message count: recorded {}, replayed {}", recorded.messages.len(), replayed.messages.len()));
    }
    for (i, (a, b)) in recorded.messages.iter().zip(&replayed.messages).enumerate() {
        if message_key(a) != message_key(b) {
            d.push(format!("message {i} differs ({:?} {:?})", b.role, b.phase));
        }
    }
    if recorded.attachments != replayed.attachments {
        let keys = |c: &Conversation| c.attachments.iter().map(|(k, v)| (*k, v.len())).collect::<Vec<_>>();
        for (i, v) in &recorded.attachments {
            if replayed.attachments.get(i) != Some(v) {
                d.push(format!("tool verdicts after message {i} differ"));
            }
        }
        if keys(recorded).len() != keys(replayed).len() {
            d.push(format!("verdict positions: recorded {:?}, replayed {:?}", keys(recorded), keys(replayed)));
        }
    }
    d
}

fn outcome_bytes(o: &Option<Outcome>) -> String {
    serde_json::to_string(o).expect("outcome serializes")
}

/// Replays the log at `path` with scripted replies and operator input taken
/// from the log itself.
pub fn replay_log(path: &Path, suite: &Suite, mode: ToolMode, tools: &ToolConfig, sink: &dyn EventSink) -> Result<ReplayReport, ReplayError> {
    let records = read_records(path)?;
    replay_records(&records, suite, mode, tools, sink)
}

pub fn replay_records(
    records: &[LogRecord],
    suite: &Suite,
    mode: ToolMode,
    tools: &ToolConfig,
    sink: &dyn EventSink,
) -> Result<ReplayReport, ReplayError> {
    let transcript = Transcript::from_records(records);
    let header = transcript.header.clone().ok_or(ReplayError::NoHeader)?;
    let spec = suite.get(&header.benchmark_id)?;
    let runner = select_tools(mode, tools, transcript.tools.clone())?;
    let limits = header.limits.unwrap_or_else(LoopLimits::default);
    let meta = SessionMeta {
        conversation_id: header.conversation_id.clone(),
        benchmark_id: header.benchmark_id.clone(),
        trial_label: header.trial_label.clone(),
        limits,
    };
    let recorded_conv = conversation_from_records(records);
    let recorded = transcript.outcome.clone();
    let mut session = Session::open(&meta, Box::new(ScriptedBackend::new(&transcript)), None).map_err(|e| ReplayError::Driver(e.into()))?;
    let setup = RunSetup {
        spec,
        golden_testbench: Some(suite.golden_testbench(spec)),
        tools: runner.as_ref(),
        patterns: &tools.patterns,
        limits,
    };
    let mut operator = ScriptedOperator { actions: transcript.actions.clone() };
    let mut differences = Vec::new();
    let replayed = match run_conversation(&setup, &mut session, &mut operator, sink) {
        Ok(r) => Some(r.outcome),
        Err(e) if e.is_replay_divergence() => {
            differences.push(format!("replay diverged from the log: {e}"));
            None
        }
        Err(e) => return Err(ReplayError::Driver(e)),
    };
    differences.extend(compare(&recorded_conv, &session.conversation));
    if outcome_bytes(&recorded) != outcome_bytes(&replayed) {
        differences.push(format!("outcome: recorded {}, replayed {}", outcome_bytes(&recorded), outcome_bytes(&replayed)));
    }
    if let (Some((c, _)), Some(o)) = (&transcript.compliance, &replayed) {
        if o.compliant != Some(*c) {
            differences.push(format!("compliance record says {c}, replay says {:?}", o.compliant));
        }
    }
    differences.dedup();
    Ok(ReplayReport { recorded, replayed, differences, tool_kind: runner.kind() })
}
