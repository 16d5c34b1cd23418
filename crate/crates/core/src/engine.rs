//! The conversation state machine.
//!
//! [`step`] is a pure transition function. The state carries a [`Directive`]
//! telling the driver which side effect to perform next (send a prompt,
//! regenerate, compile, ask the operator); the driver performs it and feeds
//! the result back as a [`LoopEvent`]. User messages are counted at the
//! moment the engine decides to send one, so the message cap is enforced
//! before the message exists.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::hdl::conformance::ConformanceReport;
use crate::hdl::extract::{assemble_design, continuation_code, ends_inside_fence, extract_code_blocks, split_at_closing_fence, CodeBlock};
use crate::hdl::lexer::{tokenize, TokenKind};
use crate::hdl::sources::{merge_sources, reply_code};
use crate::outcome::{AbortReason, FailReason, FeedbackLevel, TerminalClass};
use crate::verdict::{ErrorFingerprint, ToolPhase, ToolVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopLimits {
    pub max_regenerations: u32,
    pub max_user_messages: u32,
    pub identical_error_threshold: u32,
    pub per_human_level_attempts: u32,
    /// "Please continue" prompts allowed for one reply.
    pub max_continuations: u32,
    /// Whether continuation prompts count toward `max_user_messages`.
    pub count_continuations: bool,
}

impl Default for LoopLimits {
    fn default() -> Self {
        LoopLimits {
            max_regenerations: 5,
            max_user_messages: 25,
            identical_error_threshold: 3,
            per_human_level_attempts: 2,
            max_continuations: 3,
            count_continuations: true,
        }
    }
}

impl LoopLimits {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.max_regenerations == 0 {
            return Err("max_regenerations must be at least 1");
        }
        if self.max_user_messages == 0 {
            return Err("max_user_messages must be at least 1");
        }
        if self.identical_error_threshold == 0 {
            return Err("identical_error_threshold must be at least 1");
        }
        if self.per_human_level_attempts == 0 {
            return Err("per_human_level_attempts must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitDesign,
    SpecGate,
    AwaitTestbench,
    BuildAndSim,
    Feedback,
    Terminal,
}

/// The side effect the driver must perform next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "do", content = "level")]
pub enum Directive {
    SendDesignPrompt,
    SendContinue,
    Regenerate,
    CheckSpec,
    SendTestbenchPrompt,
    Compile,
    Simulate,
    SendFixPrompt,
    RequestHumanFeedback(FeedbackLevel),
    SendHumanFeedback,
    Done,
}

impl Directive {
    /// Directives whose execution sends a user message.
    pub fn sends_user_message(self) -> bool {
        matches!(
            self,
            Directive::SendDesignPrompt
                | Directive::SendContinue
                | Directive::SendTestbenchPrompt
                | Directive::SendFixPrompt
                | Directive::SendHumanFeedback
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopState {
    pub phase: Phase,
    pub directive: Directive,
    pub feedback_level: Option<FeedbackLevel>,
    pub regen_count: u32,
    pub user_message_count: u32,
    pub continuation_count: u32,
    pub fingerprint_history: Vec<ErrorFingerprint>,
    /// Consecutive equal fingerprints seen at the current level.
    pub streak: u32,
    /// Whether the compile step of the current build has passed.
    pub compiled: bool,
    pub working_design: String,
    pub working_testbench: String,
    /// Code from a reply still being continued.
    pub pending_parts: Vec<String>,
    /// Whether the reply being continued stopped inside a code fence.
    #[serde(default)]
    pub fence_open: bool,
    /// Tool output for the next fix prompt.
    pub pending_feedback: String,
    pub pending_timed_out: bool,
    pub result: Option<TerminalClass>,
    pub fail_reason: Option<FailReason>,
}

impl LoopState {
    /// State before the design prompt goes out; the prompt is already counted.
    pub fn start() -> Self {
        LoopState {
            phase: Phase::AwaitDesign,
            directive: Directive::SendDesignPrompt,
            feedback_level: None,
            regen_count: 0,
            user_message_count: 1,
            continuation_count: 0,
            fingerprint_history: Vec::new(),
            streak: 0,
            compiled: false,
            working_design: String::new(),
            working_testbench: String::new(),
            pending_parts: Vec::new(),
            fence_open: false,
            pending_feedback: String::new(),
            pending_timed_out: false,
            result: None,
            fail_reason: None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.phase == Phase::Terminal
    }

    fn fail(&mut self, reason: FailReason) {
        self.phase = Phase::Terminal;
        self.directive = Directive::Done;
        self.result = Some(TerminalClass::FAIL);
        self.fail_reason = Some(reason);
        self.pending_parts.clear();
        self.fence_open = false;
    }

    fn succeed(&mut self) {
        self.phase = Phase::Terminal;
        self.directive = Directive::Done;
        self.result = Some(TerminalClass::success_at(self.feedback_level));
    }

    /// Reserves one user message; on the cap the run fails instead.
    fn reserve_message(&mut self, limits: &LoopLimits) -> bool {
        if self.user_message_count >= limits.max_user_messages {
            self.fail(FailReason::MessageCap);
            false
        } else {
            self.user_message_count += 1;
            true
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LoopEvent {
    AssistantReply { text: String },
    SpecCheck { report: ConformanceReport },
    ToolVerdict { verdict: ToolVerdict },
    HumanFeedback { text: String, level: FeedbackLevel },
    OperatorAbort { reason: AbortReason },
}

impl LoopEvent {
    pub fn name(&self) -> &'static str {
        match self {
            LoopEvent::AssistantReply { .. } => "assistant_reply",
            LoopEvent::SpecCheck { .. } => "spec_check",
            LoopEvent::ToolVerdict { .. } => "tool_verdict",
            LoopEvent::HumanFeedback { .. } => "human_feedback",
            LoopEvent::OperatorAbort { .. } => "operator_abort",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("state is terminal; no further events are accepted")]
    Terminal,
    #[error("event `{event}` does not fit directive {directive:?}")]
    Unexpected { directive: Directive, event: &'static str },
    #[error("verdict for {got:?} while expecting {expected:?}")]
    WrongToolPhase { expected: ToolPhase, got: ToolPhase },
    #[error("feedback at {got} while {expected} was requested")]
    WrongLevel { expected: FeedbackLevel, got: FeedbackLevel },
}

/// Applies one event. Pure: the input state is not modified.
pub fn step(state: &LoopState, event: &LoopEvent, limits: &LoopLimits) -> Result<LoopState, ProtocolError> {
    if state.is_terminal() {
        return Err(ProtocolError::Terminal);
    }
    let mut s = state.clone();
    if let LoopEvent::OperatorAbort { reason } = event {
        s.fail(FailReason::OperatorAbort(*reason));
        return Ok(s);
    }
    let unexpected = || ProtocolError::Unexpected { directive: state.directive, event: event.name() };
    match (state.directive, event) {
        (
            Directive::SendDesignPrompt
            | Directive::Regenerate
            | Directive::SendContinue
            | Directive::SendTestbenchPrompt
            | Directive::SendFixPrompt
            | Directive::SendHumanFeedback,
            LoopEvent::AssistantReply { text },
        ) => {
            on_reply(&mut s, text, limits);
        }
        (Directive::CheckSpec, LoopEvent::SpecCheck { report }) => {
            if report.conforms {
                if s.reserve_message(limits) {
                    s.phase = Phase::AwaitTestbench;
                    s.directive = Directive::SendTestbenchPrompt;
                }
            } else {
                s.regen_count += 1;
                if s.regen_count > limits.max_regenerations {
                    s.fail(FailReason::RegenerationsExhausted);
                } else {
                    s.phase = Phase::AwaitDesign;
                    s.directive = Directive::Regenerate;
                }
            }
        }
        (Directive::Compile | Directive::Simulate, LoopEvent::ToolVerdict { verdict }) => {
            let expected = if state.compiled { ToolPhase::Simulate } else { ToolPhase::Compile };
            if verdict.phase != expected {
                return Err(ProtocolError::WrongToolPhase { expected, got: verdict.phase });
            }
            if verdict.passed {
                if expected == ToolPhase::Compile {
                    s.compiled = true;
                    s.directive = Directive::Simulate;
                } else {
                    s.succeed();
                }
            } else {
                on_failure(&mut s, verdict, limits);
            }
        }
        (Directive::RequestHumanFeedback(expected), LoopEvent::HumanFeedback { level, .. }) => {
            if *level != expected {
                return Err(ProtocolError::WrongLevel { expected, got: *level });
            }
            // the cap was checked when the request was raised
            s.user_message_count += 1;
            s.directive = Directive::SendHumanFeedback;
        }
        _ => return Err(unexpected()),
    }
    Ok(s)
}

fn mentions_module(code: &str) -> bool {
    tokenize(code).iter().any(|t| t.kind == TokenKind::Ident && (t.text == "module" || t.text == "endmodule"))
}

fn as_blocks(parts: &[String]) -> Vec<CodeBlock> {
    parts
        .iter()
        .enumerate()
        .map(|(i, t)| CodeBlock { text: t.clone(), origin_message_index: i, fenced: false, declared_language_tag: None })
        .collect()
}

fn on_reply(s: &mut LoopState, text: &str, limits: &LoopLimits) {
    let fenced_text = |t: &str| extract_code_blocks(t).into_iter().filter(|b| b.fenced).map(|b| b.text).collect::<Vec<_>>().concat();
    let (code, open) = if s.pending_parts.is_empty() {
        (reply_code(&extract_code_blocks(text)), ends_inside_fence(text))
    } else if s.fence_open {
        match split_at_closing_fence(text) {
            (head, None) => (String::from(head), true),
            ("", Some(_)) => {
                let code = continuation_code(text, s.pending_parts.len()).into_iter().map(|b| b.text).collect::<Vec<_>>().concat();
                (code, ends_inside_fence(text))
            }
            (head, Some(rest)) => {
                let mut code = String::from(head);
                code.push_str(&fenced_text(rest));
                (code, ends_inside_fence(rest))
            }
        }
    } else {
        let code = continuation_code(text, s.pending_parts.len()).into_iter().map(|b| b.text).collect::<Vec<_>>().concat();
        (code, ends_inside_fence(text))
    };
    s.pending_parts.push(code);
    let joined = s.pending_parts.concat();
    let truncated = open || (mentions_module(&joined) && assemble_design(&as_blocks(&s.pending_parts)).is_err());
    if truncated && s.continuation_count < limits.max_continuations {
        if limits.count_continuations && !s.reserve_message(limits) {
            return;
        }
        s.continuation_count += 1;
        s.fence_open = open;
        s.directive = Directive::SendContinue;
        return;
    }
    let code = assemble_design(&as_blocks(&s.pending_parts)).unwrap_or(joined);
    s.pending_parts.clear();
    s.fence_open = false;
    s.continuation_count = 0;
    match s.phase {
        Phase::AwaitDesign => {
            let (design, testbench) = merge_sources("", "", &code);
            s.working_design = if design.is_empty() { code } else { design };
            s.working_testbench = testbench;
            s.phase = Phase::SpecGate;
            s.directive = Directive::CheckSpec;
        }
        _ => {
            let (design, testbench) = merge_sources(&s.working_design, &s.working_testbench, &code);
            s.working_design = design;
            s.working_testbench = testbench;
            s.compiled = false;
            s.phase = Phase::BuildAndSim;
            s.directive = Directive::Compile;
        }
    }
}

fn on_failure(s: &mut LoopState, verdict: &ToolVerdict, limits: &LoopLimits) {
    let fp = verdict.fingerprint.clone();
    let repeat = s.fingerprint_history.last() == Some(&fp);
    s.fingerprint_history.push(fp);
    s.streak = if repeat { s.streak + 1 } else { 1 };
    s.pending_feedback = verdict.feedback_text.clone();
    s.pending_timed_out = verdict.timed_out;
    if s.feedback_level.is_none() {
        s.feedback_level = Some(FeedbackLevel::TF);
    }
    let level = s.feedback_level.expect("level set above");
    let threshold = if level == FeedbackLevel::TF { limits.identical_error_threshold } else { limits.per_human_level_attempts };
    if s.streak >= threshold {
        match level.next() {
            Some(next) => {
                s.feedback_level = Some(next);
                s.streak = 0;
            }
            None => {
                s.fail(FailReason::FeedbackExhausted);
                return;
            }
        }
    }
    s.phase = Phase::Feedback;
    match s.feedback_level.expect("level set above") {
        FeedbackLevel::TF => {
            if s.reserve_message(limits) {
                s.directive = Directive::SendFixPrompt;
            }
        }
        human => {
            if s.user_message_count >= limits.max_user_messages {
                s.fail(FailReason::MessageCap);
            } else {
                s.directive = Directive::RequestHumanFeedback(human);
            }
        }
    }
}
