//! The newline-delimited conversation log and scripted transcripts.
//!
//! A log is one JSON object per line, tagged by `record`. Logs written by a
//! run are also valid transcripts: assistant messages become scripted
//! replies, human feedback becomes scripted operator input and tool records
//! answer compile and simulate steps. Hand-written transcripts may use the
//! shorter `reply`, `feedback` and `abort` records instead.

use std::collections::{BTreeMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hdlloop_core::conversation::{ChatMessage, Conversation, Role};
use hdlloop_core::conversation::MessagePhase;
use hdlloop_core::engine::LoopLimits;
use hdlloop_core::outcome::{AbortReason, FeedbackLevel, Outcome};
use hdlloop_core::verdict::ToolVerdict;
use serde::{Deserialize, Serialize};

use crate::toolchain::ToolRecord;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub v: u32,
    pub conversation_id: String,
    pub benchmark_id: String,
    pub trial_label: String,
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<LoopLimits>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix_output_line_limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header(Header),
    Message {
        index: usize,
        #[serde(flatten)]
        message: ChatMessage,
    },
    Superseded {
        index: usize,
    },
    Verdict {
        after: usize,
        verdict: ToolVerdict,
    },
    Tool(ToolRecord),
    Compliance {
        compliant: bool,
        #[serde(default)]
        evidence: Vec<String>,
    },
    Outcome(Outcome),
    Reply {
        takes: Vec<String>,
    },
    Feedback {
        level: FeedbackLevel,
        text: String,
    },
    Abort {
        reason: AbortReason,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("record {record}: {message}")]
    Parse { record: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Parses a log or transcript. Record numbers in errors count from 1 and
/// skip blank lines.
pub fn parse_records(text: &str) -> Result<Vec<LogRecord>, LogError> {
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let record = out.len() + 1;
        let r = serde_json::from_str(line).map_err(|e| LogError::Parse { record, message: e.to_string() })?;
        out.push(r);
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<LogRecord>, LogError> {
    let text = std::fs::read_to_string(path).map_err(|source| LogError::Io { path: path.to_path_buf(), source })?;
    parse_records(&text)
}

pub fn to_line(r: &LogRecord) -> String {
    serde_json::to_string(r).expect("log records serialize")
}

/// Append-only writer, flushed after every record.
#[derive(Debug)]
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<LogWriter, LogError> {
        let io = |source| LogError::Io { path: path.to_path_buf(), source };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let f = OpenOptions::new().create(true).write(true).truncate(true).open(path).map_err(io)?;
        Ok(LogWriter { path: path.to_path_buf(), out: BufWriter::new(f) })
    }

    pub fn append(&mut self, r: &LogRecord) -> Result<(), LogError> {
        let io = |source| LogError::Io { path: self.path.clone(), source };
        writeln!(self.out, "{}", to_line(r)).map_err(io)?;
        self.out.flush().map_err(io)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Rebuilds the conversation a log describes.
pub fn conversation_from_records(records: &[LogRecord]) -> Conversation {
    let mut c = Conversation::new("", "", "");
    for r in records {
        match r {
            LogRecord::Header(h) => {
                c.id = h.conversation_id.clone();
                c.benchmark_id = h.benchmark_id.clone();
                c.trial_label = h.trial_label.clone();
            }
            LogRecord::Message { message, .. } => c.messages.push(message.clone()),
            LogRecord::Superseded { index } => {
                if let Some(m) = c.messages.get_mut(*index) {
                    m.superseded = true;
                }
            }
            LogRecord::Verdict { after, verdict } => c.attach(*after, verdict.clone()),
            _ => {}
        }
    }
    c
}

/// Serializes a conversation as log records (header fields left minimal).
pub fn conversation_to_records(c: &Conversation) -> Vec<LogRecord> {
    let mut out = vec![LogRecord::Header(Header {
        v: LOG_VERSION,
        conversation_id: c.id.clone(),
        benchmark_id: c.benchmark_id.clone(),
        trial_label: c.trial_label.clone(),
        backend: String::new(),
        model: None,
        temperature: None,
        limits: None,
        fix_output_line_limit: None,
    })];
    for (i, m) in c.messages.iter().enumerate() {
        let mut plain = m.clone();
        plain.superseded = false;
        out.push(LogRecord::Message { index: i, message: plain });
        if m.superseded {
            out.push(LogRecord::Superseded { index: i });
        }
        for v in c.attachments.get(&i).into_iter().flatten() {
            out.push(LogRecord::Verdict { after: i, verdict: v.clone() });
        }
    }
    out
}

/// Scripted operator input.
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptedAction {
    Feedback { level: FeedbackLevel, text: String },
    Abort(AbortReason),
}

/// Everything a scripted run needs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub header: Option<Header>,
    /// Alternative replies for each user prompt, in prompt order.
    pub positions: Vec<Vec<String>>,
    pub actions: VecDeque<ScriptedAction>,
    pub tools: Vec<ToolRecord>,
    pub outcome: Option<Outcome>,
    pub compliance: Option<(bool, Vec<String>)>,
}

impl Transcript {
    pub fn from_records(records: &[LogRecord]) -> Transcript {
        let mut t = Transcript::default();
        let mut open_position = false;
        for r in records {
            match r {
                LogRecord::Header(h) => t.header = Some(h.clone()),
                LogRecord::Message { message, .. } => match message.role {
                    Role::User => {
                        if message.phase == MessagePhase::HumanFeedback {
                            t.actions.push_back(ScriptedAction::Feedback {
                                level: message.feedback_level.unwrap_or(FeedbackLevel::SHF),
                                text: message.content.clone(),
                            });
                        }
                        open_position = false;
                    }
                    Role::Assistant => {
                        if !open_position {
                            t.positions.push(Vec::new());
                            open_position = true;
                        }
                        t.positions.last_mut().expect("pushed").push(message.content.clone());
                    }
                },
                LogRecord::Reply { takes } => {
                    t.positions.push(takes.clone());
                    open_position = false;
                }
                LogRecord::Feedback { level, text } => t.actions.push_back(ScriptedAction::Feedback { level: *level, text: text.clone() }),
                LogRecord::Abort { reason } => t.actions.push_back(ScriptedAction::Abort(*reason)),
                LogRecord::Tool(rec) => t.tools.push(rec.clone()),
                LogRecord::Outcome(o) => t.outcome = Some(o.clone()),
                LogRecord::Compliance { compliant, evidence } => t.compliance = Some((*compliant, evidence.clone())),
                LogRecord::Superseded { .. } | LogRecord::Verdict { .. } => {}
            }
        }
        t
    }

    pub fn load(path: &Path) -> Result<Transcript, LogError> {
        Ok(Transcript::from_records(&read_records(path)?))
    }
}

/// Records per kind, for quick summaries.
pub fn record_counts(records: &[LogRecord]) -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    for r in records {
        let k = match r {
            LogRecord::Header(_) => "header",
            LogRecord::Message { .. } => "message",
            LogRecord::Superseded { .. } => "superseded",
            LogRecord::Verdict { .. } => "verdict",
            LogRecord::Tool(_) => "tool",
            LogRecord::Compliance { .. } => "compliance",
            LogRecord::Outcome(_) => "outcome",
            LogRecord::Reply { .. } => "reply",
            LogRecord::Feedback { .. } => "feedback",
            LogRecord::Abort { .. } => "abort",
        };
        *m.entry(k).or_default() += 1;
    }
    m
}
