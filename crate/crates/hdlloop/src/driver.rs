//! Runs one conversation: performs each engine directive and feeds the result back.

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use hdlloop_core::bench::{BenchmarkSpec, SpecError};
use hdlloop_core::conversation::{count_user_messages, ChatMessage, Conversation, MessagePhase};
use hdlloop_core::engine::{step, Directive, LoopEvent, LoopLimits, LoopState, Phase, ProtocolError};
use hdlloop_core::hdl::conformance::{gate, ConformanceReport};
use hdlloop_core::hdl::lint_systemverilog;
use hdlloop_core::outcome::{AbortReason, FeedbackLevel, Outcome, TerminalClass};
use hdlloop_core::prompt::{compose_fix_prompt, render_design_prompt, CONTINUE_PROMPT, FIX_OUTPUT_LINE_LIMIT, TESTBENCH_PROMPT};
use hdlloop_core::verdict::{classify_compile, classify_sim, ErrorPatterns, SimResult, ToolVerdict};
use serde::Serialize;

use crate::compliance::check_compliance;
use crate::record::{LogRecord, ScriptedAction};
use crate::session::{read_block, Session, SessionError};
use crate::toolchain::{compile_record, sim_record, Artifact, SourceFile, ToolError, ToolRunner};

pub const EVENT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error("engine: {0}")]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("scripted operator input ran out at a {0} feedback request")]
    OperatorUnderrun(FeedbackLevel),
    #[error("scripted feedback is for {got} but {expected} was requested")]
    OperatorLevel { expected: FeedbackLevel, got: FeedbackLevel },
}

impl DriverError {
    /// Failures of the surroundings rather than of the run: missing tools,
    /// unreachable or unauthenticated backends.
    pub fn is_environment(&self) -> bool {
        match self {
            DriverError::Tool(e) => e.is_environment() && !matches!(e, ToolError::CassetteMiss { .. }),
            DriverError::Session(e) => e.is_transport(),
            _ => false,
        }
    }

    /// The run diverged from its transcript.
    pub fn is_replay_divergence(&self) -> bool {
        matches!(
            self,
            DriverError::Tool(ToolError::CassetteMiss { .. })
                | DriverError::Session(SessionError::ReplayUnderrun { .. })
                | DriverError::OperatorUnderrun(_)
                | DriverError::OperatorLevel { .. }
        )
    }
}

/// Observable progress, streamed to the steering UI and to tests.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Idle,
    Started { benchmark_id: String, trial_label: String },
    Transition { from: Phase, to: Phase, directive: Directive, user_messages: u32 },
    Message { index: usize, message: ChatMessage },
    SpecCheck { report: ConformanceReport },
    Lint { warnings: Vec<String> },
    Verdict { after: usize, verdict: ToolVerdict },
    EscalationRequest { level: FeedbackLevel, tool_output: String },
    Terminal { outcome: Outcome },
    Error { message: String, environment: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub v: u32,
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

pub trait EventSink: Send + Sync {
    fn emit(&self, envelope: Envelope);
}

/// Numbers events and hands them to a sink.
pub struct Events<'a> {
    seq: AtomicU64,
    sink: &'a dyn EventSink,
}

impl<'a> Events<'a> {
    pub fn new(sink: &'a dyn EventSink) -> Self {
        Events { seq: AtomicU64::new(0), sink }
    }

    pub fn emit(&self, event: Event) {
        let seq = self.seq.fetch_add(1, Ordering::SeqCst);
        self.sink.emit(Envelope { v: EVENT_VERSION, seq, event });
    }
}

pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&self, _: Envelope) {}
}

#[derive(Default)]
pub struct CollectSink(pub Mutex<Vec<Envelope>>);

impl EventSink for CollectSink {
    fn emit(&self, e: Envelope) {
        self.0.lock().expect("sink lock").push(e);
    }
}

impl CollectSink {
    pub fn events(&self) -> Vec<Envelope> {
        self.0.lock().expect("sink lock").clone()
    }
}

/// What the operator sees when asked for feedback.
#[derive(Debug, Clone)]
pub struct FeedbackRequest<'a> {
    pub level: FeedbackLevel,
    pub tool_output: &'a str,
    pub design: &'a str,
    pub testbench: &'a str,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorAction {
    Feedback(String),
    Abort(AbortReason),
}

pub trait FeedbackProvider: Send {
    fn request(&mut self, req: &FeedbackRequest<'_>) -> Result<OperatorAction, DriverError>;
}

/// Operator input from a transcript.
pub struct ScriptedOperator {
    pub actions: VecDeque<ScriptedAction>,
}

impl FeedbackProvider for ScriptedOperator {
    fn request(&mut self, req: &FeedbackRequest<'_>) -> Result<OperatorAction, DriverError> {
        match self.actions.pop_front() {
            None => Err(DriverError::OperatorUnderrun(req.level)),
            Some(ScriptedAction::Abort(r)) => Ok(OperatorAction::Abort(r)),
            Some(ScriptedAction::Feedback { level, text }) if level == req.level => Ok(OperatorAction::Feedback(text)),
            Some(ScriptedAction::Feedback { level, .. }) => Err(DriverError::OperatorLevel { expected: req.level, got: level }),
        }
    }
}

/// Operator at a terminal. A block whose first line is `/abort` (optionally
/// followed by `wrote_hdl`) aborts the run.
pub struct TerminalOperator {
    input: Box<dyn BufRead + Send>,
    output: Box<dyn Write + Send>,
}

impl TerminalOperator {
    pub fn new(input: Box<dyn BufRead + Send>, output: Box<dyn Write + Send>) -> Self {
        TerminalOperator { input, output }
    }

    pub fn stdio() -> Self {
        Self::new(Box::new(std::io::BufReader::new(std::io::stdin())), Box::new(std::io::stderr()))
    }
}

pub fn parse_operator_block(block: &str) -> OperatorAction {
    let first = block.lines().next().unwrap_or("").trim();
    match first.strip_prefix("/abort") {
        Some(rest) if rest.trim() == "wrote_hdl" => OperatorAction::Abort(AbortReason::WroteHdl),
        Some(_) => OperatorAction::Abort(AbortReason::Other),
        None => OperatorAction::Feedback(block.to_string()),
    }
}

impl FeedbackProvider for TerminalOperator {
    fn request(&mut self, req: &FeedbackRequest<'_>) -> Result<OperatorAction, DriverError> {
        let io = |e: std::io::Error| DriverError::Session(SessionError::Io(e));
        writeln!(
            self.output,
            "\n=== {} feedback requested. Tool output:\n{}\n=== Type feedback ending with a line holding `.`, or `/abort [wrote_hdl]` ===",
            req.level, req.tool_output
        )
        .map_err(io)?;
        self.output.flush().map_err(io)?;
        let block = read_block(&mut *self.input).map_err(io)?.ok_or(SessionError::Closed)?;
        Ok(parse_operator_block(&block))
    }
}

/// Fixed inputs of one conversation.
pub struct RunSetup<'a> {
    pub spec: &'a BenchmarkSpec,
    /// Golden testbench for the compliance check; none skips the check.
    pub golden_testbench: Option<&'a str>,
    pub tools: &'a dyn ToolRunner,
    pub patterns: &'a ErrorPatterns,
    pub limits: LoopLimits,
}

#[derive(Debug, Clone)]
pub struct ConversationResult {
    pub outcome: Outcome,
    pub state: LoopState,
    pub design: String,
    pub testbench: String,
    pub conversation: Conversation,
    /// Compile and simulate invocations, including the compliance check.
    pub tool_invocations: usize,
    pub records: Vec<LogRecord>,
}

pub const DESIGN_FILE: &str = "design.v";
pub const TESTBENCH_FILE: &str = "testbench.v";

fn build_sources(design: &str, testbench: &str) -> Vec<SourceFile> {
    let mut v = vec![SourceFile::new(DESIGN_FILE, design)];
    if !testbench.trim().is_empty() {
        v.push(SourceFile::new(TESTBENCH_FILE, testbench));
    }
    v
}

struct Runner<'a, 'b> {
    setup: &'a RunSetup<'a>,
    session: &'b mut Session,
    provider: &'b mut dyn FeedbackProvider,
    events: &'b Events<'b>,
    artifact: Option<Artifact>,
    human_text: String,
    tool_invocations: usize,
}

impl Runner<'_, '_> {
    fn send(&mut self, msg: ChatMessage) -> Result<LoopEvent, DriverError> {
        let index = self.session.conversation.messages.len();
        self.events.emit(Event::Message { index, message: msg.clone() });
        let reply = self.session.send(msg)?;
        self.events.emit(Event::Message { index: index + 1, message: reply.clone() });
        Ok(LoopEvent::AssistantReply { text: reply.content })
    }

    fn verdict(&mut self, v: ToolVerdict) -> Result<LoopEvent, DriverError> {
        let after = self.session.last_index();
        self.session.conversation.attach(after, v.clone());
        self.session.persist(LogRecord::Verdict { after, verdict: v.clone() })?;
        self.events.emit(Event::Verdict { after, verdict: v.clone() });
        Ok(LoopEvent::ToolVerdict { verdict: v })
    }

    fn perform(&mut self, state: &LoopState) -> Result<LoopEvent, DriverError> {
        let spec = self.setup.spec;
        Ok(match state.directive {
            Directive::SendDesignPrompt => self.send(ChatMessage::user(render_design_prompt(spec)?, MessagePhase::Design, None))?,
            Directive::SendContinue => self.send(ChatMessage::user(CONTINUE_PROMPT, MessagePhase::Continuation, None))?,
            Directive::SendTestbenchPrompt => self.send(ChatMessage::user(TESTBENCH_PROMPT, MessagePhase::Testbench, None))?,
            Directive::SendFixPrompt => {
                let text = compose_fix_prompt(&state.pending_feedback, FIX_OUTPUT_LINE_LIMIT, state.pending_timed_out);
                self.send(ChatMessage::user(text, MessagePhase::ToolFeedback, Some(FeedbackLevel::TF)))?
            }
            Directive::SendHumanFeedback => {
                let text = std::mem::take(&mut self.human_text);
                self.send(ChatMessage::user(text, MessagePhase::HumanFeedback, state.feedback_level))?
            }
            Directive::Regenerate => {
                let index = self.session.conversation.messages.len();
                let reply = self.session.regenerate()?;
                self.events.emit(Event::Message { index, message: reply.clone() });
                LoopEvent::AssistantReply { text: reply.content }
            }
            Directive::CheckSpec => {
                let report = gate(&state.working_design, &spec.interface, &spec.id);
                self.events.emit(Event::SpecCheck { report: report.clone() });
                LoopEvent::SpecCheck { report }
            }
            Directive::Compile => {
                let warnings: Vec<String> = lint_systemverilog(&state.working_design)
                    .iter()
                    .map(|w| format!("{DESIGN_FILE}: {w}"))
                    .chain(lint_systemverilog(&state.working_testbench).iter().map(|w| format!("{TESTBENCH_FILE}: {w}")))
                    .collect();
                if !warnings.is_empty() {
                    tracing::warn!(count = warnings.len(), "SystemVerilog constructs in Verilog sources");
                    self.events.emit(Event::Lint { warnings });
                }
                let sources = build_sources(&state.working_design, &state.working_testbench);
                self.tool_invocations += 1;
                let compiled = self.setup.tools.compile(&sources, None)?;
                self.session.persist(LogRecord::Tool(compile_record(&sources, None, &compiled)))?;
                self.artifact = compiled.artifact;
                self.verdict(classify_compile(&compiled.result))?
            }
            Directive::Simulate => {
                let artifact = self.artifact.take().ok_or_else(|| ToolError::Precondition("no compiled artifact to simulate".into()))?;
                self.tool_invocations += 1;
                let out = self.setup.tools.simulate(&artifact)?;
                self.session.persist(LogRecord::Tool(sim_record(&artifact, &out)))?;
                let r = SimResult::from_output(out.exit_status, out.raw_output, out.timed_out, self.setup.patterns);
                self.verdict(classify_sim(&r))?
            }
            Directive::RequestHumanFeedback(level) => {
                self.events.emit(Event::EscalationRequest { level, tool_output: state.pending_feedback.clone() });
                let req = FeedbackRequest {
                    level,
                    tool_output: &state.pending_feedback,
                    design: &state.working_design,
                    testbench: &state.working_testbench,
                };
                match self.provider.request(&req)? {
                    OperatorAction::Feedback(text) => {
                        self.human_text = text.clone();
                        LoopEvent::HumanFeedback { text, level }
                    }
                    OperatorAction::Abort(reason) => {
                        self.session.persist(LogRecord::Abort { reason })?;
                        LoopEvent::OperatorAbort { reason }
                    }
                }
            }
            Directive::Done => return Err(ProtocolError::Terminal.into()),
        })
    }
}

/// Drives `session` through the loop until a terminal state, then checks
/// compliance of passing designs. Every message, tool record and verdict is
/// persisted through the session as it happens.
pub fn run_conversation(
    setup: &RunSetup<'_>,
    session: &mut Session,
    provider: &mut dyn FeedbackProvider,
    sink: &dyn EventSink,
) -> Result<ConversationResult, DriverError> {
    let events = Events::new(sink);
    let benchmark_id = setup.spec.id.clone();
    let trial_label = session.conversation.trial_label.clone();
    events.emit(Event::Started { benchmark_id: benchmark_id.clone(), trial_label: trial_label.clone() });
    let result = drive(setup, session, provider, &events);
    if let Err(e) = &result {
        events.emit(Event::Error { message: e.to_string(), environment: e.is_environment() });
    }
    result
}

fn drive(
    setup: &RunSetup<'_>,
    session: &mut Session,
    provider: &mut dyn FeedbackProvider,
    events: &Events<'_>,
) -> Result<ConversationResult, DriverError> {
    let mut state = LoopState::start();
    let mut runner = Runner { setup, session, provider, events, artifact: None, human_text: String::new(), tool_invocations: 0 };
    while !state.is_terminal() {
        let event = runner.perform(&state)?;
        let next = step(&state, &event, &setup.limits)?;
        tracing::debug!(from = ?state.phase, to = ?next.phase, directive = ?next.directive, "step");
        events.emit(Event::Transition { from: state.phase, to: next.phase, directive: next.directive, user_messages: next.user_message_count });
        state = next;
    }
    let tool_invocations_loop = runner.tool_invocations;
    let terminal = state.result.unwrap_or(TerminalClass::FAIL);
    let (compliant, evidence, extra_runs) = if terminal == TerminalClass::FAIL {
        (None, Vec::new(), 0)
    } else if let Some(tb) = setup.golden_testbench {
        let c = check_compliance(setup.spec, &state.working_design, tb, setup.tools, setup.patterns)?;
        for r in &c.records {
            session_persist(runner.session, LogRecord::Tool(r.clone()))?;
        }
        session_persist(runner.session, LogRecord::Compliance { compliant: c.compliant, evidence: c.evidence.clone() })?;
        (Some(c.compliant), c.evidence, c.tool_invocations)
    } else {
        (Some(false), vec!["no golden testbench available".to_string()], 0)
    };
    let session = runner.session;
    let outcome = Outcome {
        benchmark_id: setup.spec.id.clone(),
        trial_label: session.conversation.trial_label.clone(),
        terminal,
        compliant,
        user_messages: count_user_messages(&session.conversation) as u32,
        compliance_evidence: evidence,
    };
    session.persist(LogRecord::Outcome(outcome.clone()))?;
    events.emit(Event::Terminal { outcome: outcome.clone() });
    Ok(ConversationResult {
        outcome,
        design: state.working_design.clone(),
        testbench: state.working_testbench.clone(),
        conversation: session.conversation.clone(),
        tool_invocations: tool_invocations_loop + extra_runs,
        records: session.records.clone(),
        state,
    })
}

fn session_persist(s: &mut Session, r: LogRecord) -> Result<(), DriverError> {
    s.persist(r).map_err(DriverError::from)
}
