//! Invariant checks for the loop state machine. Traces are built from a
//! small alphabet of [`Choice`]s so that generators and exhaustive walks can
//! share them.

use alloc::string::String;
use alloc::vec::Vec;

use crate::bench::{PortRole, PortSpec};
use crate::engine::{step, Directive, LoopEvent, LoopLimits, LoopState};
use crate::hdl::conformance::ConformanceReport;
use crate::hdl::Direction;
use crate::outcome::{AbortReason, FailReason, FeedbackLevel, TerminalClass};
use crate::verdict::{ErrorFingerprint, ToolPhase, ToolVerdict};

const GOOD: &str = "```verilog\nmodule m(input a, output b);\nassign b = a;\nendmodule\n```";
const CUT: &str = "```verilog\nmodule m(input a, output b);\nassign b = a;\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Good,
    Truncated,
    Conform(bool),
    Pass,
    /// A failing tool run; equal numbers give equal fingerprints.
    Fail(u8),
    Human,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("step {at}: {rule}")]
pub struct Violation {
    pub at: usize,
    pub rule: &'static str,
}

fn report(conforms: bool) -> ConformanceReport {
    let missing = if conforms {
        Vec::new()
    } else {
        alloc::vec![PortSpec { name: "x".into(), direction: Direction::Input, width: 1, role: PortRole::Plain, label: "x".into() }]
    };
    ConformanceReport {
        conforms,
        missing,
        extra: Vec::new(),
        width_mismatches: Vec::new(),
        direction_mismatches: Vec::new(),
        bindings: Vec::new(),
    }
}

fn verdict(phase: ToolPhase, fail: Option<u8>) -> ToolVerdict {
    let keys: Vec<String> = fail.map(|k| alloc::format!("err-{k}")).into_iter().collect();
    ToolVerdict { phase, passed: fail.is_none(), feedback_text: keys.join("\n"), fingerprint: ErrorFingerprint { phase, keys }, timed_out: false }
}

/// Turns a choice into an event that fits the pending directive.
pub fn event_for(state: &LoopState, choice: Choice) -> LoopEvent {
    if let Choice::Abort = choice {
        return LoopEvent::OperatorAbort { reason: AbortReason::Other };
    }
    let tool_phase = if state.compiled { ToolPhase::Simulate } else { ToolPhase::Compile };
    match state.directive {
        Directive::CheckSpec => LoopEvent::SpecCheck { report: report(matches!(choice, Choice::Conform(true) | Choice::Good | Choice::Pass)) },
        Directive::Compile | Directive::Simulate => {
            let fail = match choice {
                Choice::Fail(k) => Some(k),
                _ => None,
            };
            LoopEvent::ToolVerdict { verdict: verdict(tool_phase, fail) }
        }
        Directive::RequestHumanFeedback(level) => LoopEvent::HumanFeedback { text: "hint".into(), level },
        _ => {
            let text = if let Choice::Truncated = choice { CUT } else { GOOD };
            LoopEvent::AssistantReply { text: text.into() }
        }
    }
}

/// Checks one transition: message cap, monotone feedback level, escalation
/// only after repeated identical failures, and consistent terminal states.
pub fn check_transition(s: &LoopState, n: &LoopState, l: &LoopLimits) -> Result<(), &'static str> {
    if n.user_message_count > l.max_user_messages {
        return Err("message cap exceeded");
    }
    if n.user_message_count < s.user_message_count {
        return Err("message count went down");
    }
    if n.feedback_level < s.feedback_level {
        return Err("feedback level went down");
    }
    if let (Some(from), true) = (s.feedback_level, n.feedback_level != s.feedback_level) {
        if from.next() != n.feedback_level {
            return Err("feedback level skipped a rung");
        }
        let need = if from == FeedbackLevel::TF { l.identical_error_threshold } else { l.per_human_level_attempts } as usize;
        let h = &n.fingerprint_history;
        if h.len() < need || !h[h.len() - need..].iter().all(|f| *f == h[h.len() - 1]) {
            return Err("escalated without a repeated failure");
        }
    }
    if n.fail_reason == Some(FailReason::FeedbackExhausted) && s.feedback_level != Some(FeedbackLevel::AHF) {
        return Err("feedback exhausted below the top level");
    }
    if n.is_terminal() {
        if n.directive != Directive::Done {
            return Err("terminal state still has work");
        }
        match n.result {
            Some(TerminalClass::FAIL) if n.fail_reason.is_none() => return Err("FAIL without a reason"),
            Some(TerminalClass::FAIL) => {}
            Some(c) if c != TerminalClass::success_at(n.feedback_level) => return Err("success class does not match the level"),
            Some(_) => {}
            None => return Err("terminal state without a result"),
        }
    }
    Ok(())
}

/// Applies `choices` from the start state until the run ends, checking every
/// transition. Choices left over after a terminal state are ignored.
pub fn run_choices(l: &LoopLimits, choices: &[Choice]) -> Result<LoopState, Violation> {
    let mut s = LoopState::start();
    for (at, c) in choices.iter().enumerate() {
        if s.is_terminal() {
            break;
        }
        let n = step(&s, &event_for(&s, *c), l).map_err(|_| Violation { at, rule: "event rejected" })?;
        check_transition(&s, &n, l).map_err(|rule| Violation { at, rule })?;
        s = n;
    }
    Ok(s)
}

/// Walks every run over a reduced alphabet and returns how many distinct
/// runs reach a terminal state. Fails if any run exceeds `max_depth` steps.
pub fn explore(l: &LoopLimits, max_depth: usize) -> Result<u64, Violation> {
    fn go(s: &LoopState, l: &LoopLimits, depth: usize, max_depth: usize, paths: &mut u64) -> Result<(), Violation> {
        if s.is_terminal() {
            *paths += 1;
            return Ok(());
        }
        if depth >= max_depth {
            return Err(Violation { at: depth, rule: "run did not terminate" });
        }
        let options: &[Choice] = match s.directive {
            Directive::CheckSpec => &[Choice::Conform(true), Choice::Conform(false)],
            Directive::Compile | Directive::Simulate => &[Choice::Pass, Choice::Fail(0), Choice::Fail(1)],
            Directive::RequestHumanFeedback(_) => &[Choice::Human],
            _ if s.continuation_count == 0 => &[Choice::Good, Choice::Truncated],
            _ => &[Choice::Good],
        };
        for c in options {
            let n = step(s, &event_for(s, *c), l).map_err(|_| Violation { at: depth, rule: "event rejected" })?;
            check_transition(s, &n, l).map_err(|rule| Violation { at: depth, rule })?;
            go(&n, l, depth + 1, max_depth, paths)?;
        }
        Ok(())
    }
    let mut paths = 0;
    go(&LoopState::start(), l, 0, max_depth, &mut paths)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_run_is_nfn() {
        let s = run_choices(&LoopLimits::default(), &[Choice::Good, Choice::Good, Choice::Good, Choice::Pass, Choice::Pass]).unwrap();
        assert_eq!(s.result, Some(TerminalClass::NFN));
    }

    #[test]
    fn checker_catches_a_lowered_level() {
        let l = LoopLimits::default();
        let mut a = LoopState::start();
        a.feedback_level = Some(FeedbackLevel::SHF);
        let b = LoopState::start();
        assert_eq!(check_transition(&a, &b, &l), Err("feedback level went down"));
        let mut c = a.clone();
        c.user_message_count = l.max_user_messages + 1;
        assert_eq!(check_transition(&a, &c, &l), Err("message cap exceeded"));
    }
}
