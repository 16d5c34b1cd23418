//! Prompt templates sent to the model.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bench::{BenchmarkSpec, SpecError};
use crate::hdl::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Design,
    Testbench,
    Fix,
    Continue,
}

/// The constant prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPrompt {
    Testbench,
    Fix,
    Continue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub body: &'static str,
}

pub const DESIGN_TEMPLATE: &str = "I am trying to create a Verilog model for {subject}. It must meet the following specifications:\n{spec_bullets}\nHow would I write a design that meets these specifications?";

pub const TESTBENCH_PROMPT: &str = "Can you create a Verilog testbench for this design? It should be self-checking and made to work with iverilog for simulation and validation. If test cases should fail, the testbench should provide enough information that the error can be found and resolved.";

pub const FIX_PROMPT: &str = "When running the simulation it gives the following output. Please provide fixed code.";

pub const CONTINUE_PROMPT: &str = "Please continue";

/// Default bound on tool-output lines replayed in one fix prompt.
pub const FIX_OUTPUT_LINE_LIMIT: usize = 100;

pub fn template(kind: PromptKind) -> PromptTemplate {
    let body = match kind {
        PromptKind::Design => DESIGN_TEMPLATE,
        PromptKind::Testbench => TESTBENCH_PROMPT,
        PromptKind::Fix => FIX_PROMPT,
        PromptKind::Continue => CONTINUE_PROMPT,
    };
    PromptTemplate { kind, body }
}

impl PromptTemplate {
    /// Names of `{placeholder}`s in the body, in order.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut rest = self.body;
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close) => {
                    out.push(&after[..close]);
                    rest = &after[close + 1..];
                }
                None => break,
            }
        }
        out
    }
}

pub fn render_fixed_prompt(kind: FixedPrompt) -> &'static str {
    match kind {
        FixedPrompt::Testbench => TESTBENCH_PROMPT,
        FixedPrompt::Fix => FIX_PROMPT,
        FixedPrompt::Continue => CONTINUE_PROMPT,
    }
}

/// The bullet section: inputs, outputs, then description and constraint lines.
pub fn spec_bullets(spec: &BenchmarkSpec) -> Result<String, SpecError> {
    let mut lines: Vec<String> = Vec::new();
    for (heading, dir) in [("Inputs", Direction::Input), ("Outputs", Direction::Output)] {
        let ports: Vec<_> = spec.interface.ports.iter().filter(|p| p.direction == dir).collect();
        if ports.is_empty() {
            continue;
        }
        lines.push(format!("- {heading}:"));
        for p in ports {
            lines.push(format!("\t- {}", p.label));
        }
    }
    for b in spec.rendered_bullets()? {
        lines.push(format!("- {b}"));
    }
    for c in &spec.extra_constraints {
        lines.push(format!("- {c}"));
    }
    Ok(lines.join("\n"))
}

pub fn render_design_prompt(spec: &BenchmarkSpec) -> Result<String, SpecError> {
    let bullets = spec_bullets(spec)?;
    Ok(DESIGN_TEMPLATE.replace("{subject}", &spec.subject).replace("{spec_bullets}", &bullets))
}

/// Fix prompt: the framing line, a blank line, then at most `limit` lines of
/// tool output. A timeout adds a closing note, since a hung simulation
/// prints nothing that says so.
pub fn compose_fix_prompt(feedback_text: &str, limit: usize, timed_out: bool) -> String {
    let mut out = String::from(FIX_PROMPT);
    let lines: Vec<&str> = feedback_text.lines().collect();
    if !lines.is_empty() {
        out.push_str("\n\n");
        out.push_str(&lines[..lines.len().min(limit)].join("\n"));
        if lines.len() > limit {
            out.push_str(&format!("\n... ({} more lines omitted)", lines.len() - limit));
        }
    }
    if timed_out {
        out.push_str("\n\nThe simulation did not finish before the time limit; it may be missing $finish.");
    }
    out
}
