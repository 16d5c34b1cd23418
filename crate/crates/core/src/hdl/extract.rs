//! Code extraction from chat replies and re-assembly across continuations.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::interface::find_modules;
use super::lexer::{tokenize, Token};
use super::HdlError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeBlock {
    pub text: String,
    pub origin_message_index: usize,
    pub fenced: bool,
    pub declared_language_tag: Option<String>,
}

struct Fence<'a> {
    tag: Option<&'a str>,
    body: &'a str,
    closed: bool,
}

fn fence_marker(line: &str) -> Option<&str> {
    let t = line.trim_start();
    t.strip_prefix("```").map(str::trim)
}

/// Splits a message into fenced regions. Body text keeps its line endings.
fn fences(message: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut open: Option<(Option<&str>, usize)> = None;
    let mut pos = 0;
    for line in message.split_inclusive('\n') {
        let line_start = pos;
        pos += line.len();
        let Some(rest) = fence_marker(line) else { continue };
        match open {
            None => {
                let tag = rest.split_whitespace().next();
                open = Some((tag, pos));
            }
            Some((tag, body_start)) if rest.is_empty() => {
                out.push(Fence { tag, body: &message[body_start..line_start], closed: true });
                open = None;
            }
            Some(_) => {}
        }
    }
    if let Some((tag, body_start)) = open {
        out.push(Fence { tag, body: &message[body_start.min(message.len())..], closed: false });
    }
    out
}

/// Unfenced fallback: from the first `module` keyword through the last
/// `endmodule`, or to end of text when the last module never closes.
fn unfenced_span(message: &str) -> Option<&str> {
    let spans = find_modules(message);
    let first = spans.first()?;
    let last = spans.last()?;
    let end = last.end.unwrap_or(message.len());
    let end = message[end..].find('\n').map_or(message.len(), |n| end + n + 1);
    Some(&message[first.start..end])
}

pub fn extract_code_blocks(message: &str) -> Vec<CodeBlock> {
    extract_code_blocks_at(message, 0)
}

pub fn extract_code_blocks_at(message: &str, origin_message_index: usize) -> Vec<CodeBlock> {
    let fenced = fences(message);
    if fenced.is_empty() {
        return unfenced_span(message)
            .map(|text| CodeBlock {
                text: text.to_string(),
                origin_message_index,
                fenced: false,
                declared_language_tag: None,
            })
            .into_iter()
            .collect();
    }
    fenced
        .into_iter()
        .filter(|f| !f.body.trim().is_empty())
        .map(|f| CodeBlock {
            text: f.body.to_string(),
            origin_message_index,
            fenced: true,
            declared_language_tag: f.tag.map(ToString::to_string),
        })
        .collect()
}

/// Whether the message ends inside an unclosed code fence.
pub fn ends_inside_fence(message: &str) -> bool {
    fences(message).last().is_some_and(|f| !f.closed)
}

/// For a reply that picks up inside a fence the previous reply left open:
/// the text before the closing fence, and what follows it (`None` while the
/// fence stays open). A reply that starts a fresh fence yields an empty head.
pub fn split_at_closing_fence(message: &str) -> (&str, Option<&str>) {
    let mut pos = 0;
    for line in message.split_inclusive('\n') {
        let start = pos;
        pos += line.len();
        match fence_marker(line) {
            Some("") if !message[..start].trim().is_empty() => return (&message[..start], Some(&message[pos..])),
            // The reply reopened a fence of its own instead of continuing.
            Some(_) => return ("", Some(message)),
            None => {}
        }
    }
    (message, None)
}

/// Code carried by a continuation reply. Falls back to the whole message when
/// it holds neither fences nor a module keyword, since a continuation usually
/// picks up mid-module.
pub fn continuation_code(message: &str, origin_message_index: usize) -> Vec<CodeBlock> {
    let blocks = extract_code_blocks_at(message, origin_message_index);
    if !blocks.is_empty() || message.trim().is_empty() {
        return blocks;
    }
    let mut text = message.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    alloc::vec![CodeBlock { text, origin_message_index, fenced: false, declared_language_tag: None }]
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
struct Balance {
    modules: i64,
    blocks: i64,
    cases: i64,
    forks: i64,
}

impl Balance {
    fn of(toks: &[Token<'_>]) -> Self {
        let mut b = Balance::default();
        for t in toks.iter().filter(|t| t.kind == super::lexer::TokenKind::Ident) {
            match t.text {
                "module" | "macromodule" => b.modules += 1,
                "endmodule" => b.modules -= 1,
                "begin" => b.blocks += 1,
                "end" => b.blocks -= 1,
                "case" | "casex" | "casez" => b.cases += 1,
                "endcase" => b.cases -= 1,
                "fork" => b.forks += 1,
                "join" => b.forks -= 1,
                _ => {}
            }
        }
        b
    }

    fn is_balanced(&self) -> bool {
        *self == Balance::default()
    }
}

fn is_balanced_source(src: &str) -> bool {
    Balance::of(&tokenize(src)).is_balanced()
}

pub fn detect_truncation(message: &str) -> bool {
    let fenced = fences(message);
    if fenced.iter().any(|f| !f.closed) {
        return true;
    }
    let code: Vec<CodeBlock> = extract_code_blocks(message);
    code.iter()
        .filter(|b| b.declared_language_tag.as_deref().map_or(true, is_verilog_tag))
        .any(|b| !is_balanced_source(&b.text))
}

fn is_verilog_tag(tag: &str) -> bool {
    matches!(tag.to_ascii_lowercase().as_str(), "verilog" | "v" | "systemverilog" | "sv" | "vhdl" | "")
}

fn trimmed_lines(s: &str) -> Vec<&str> {
    s.split_inclusive('\n').collect()
}

/// Longest `k` such that the last `k` lines of `a` equal the first `k` lines of
/// `b` after trimming whitespace.
fn line_overlap(a: &[&str], b: &[&str]) -> usize {
    let max = a.len().min(b.len());
    (1..=max)
        .rev()
        .find(|&k| a[a.len() - k..].iter().zip(&b[..k]).all(|(x, y)| x.trim() == y.trim()))
        .unwrap_or(0)
}

pub fn assemble_design(parts: &[CodeBlock]) -> Result<String, HdlError> {
    let Some(first) = parts.first() else {
        return Err(HdlError::Assembly("no code to assemble".to_string()));
    };
    let mut acc = first.text.clone();
    for part in &parts[1..] {
        let ends_open = !is_balanced_source(&acc);
        let acc_lines = trimmed_lines(&acc);
        let part_lines = trimmed_lines(&part.text);
        let k = if ends_open { line_overlap(&acc_lines, &part_lines) } else { 0 };
        if !acc.is_empty() && !acc.ends_with('\n') {
            acc.push('\n');
        }
        for line in &part_lines[k..] {
            acc.push_str(line);
        }
    }
    let acc = drop_superseded_modules(&acc);
    let spans = find_modules(&acc);
    if spans.is_empty() {
        return Err(HdlError::Assembly("no module in assembled text".to_string()));
    }
    if let Some(open) = spans.iter().find(|s| !s.is_complete()) {
        return Err(HdlError::Assembly(alloc::format!("module `{}` never reaches endmodule", open.name)));
    }
    if !is_balanced_source(&acc) {
        return Err(HdlError::Assembly("unbalanced begin/end structure".to_string()));
    }
    Ok(acc)
}

/// Removes earlier definitions of a module name that is later defined
/// completely.
fn drop_superseded_modules(src: &str) -> String {
    let spans = find_modules(src);
    let mut cut: Vec<(usize, usize)> = Vec::new();
    for (i, s) in spans.iter().enumerate() {
        let later_complete = spans[i + 1..].iter().any(|l| l.name == s.name && l.is_complete());
        if !later_complete {
            continue;
        }
        let end = match s.end {
            Some(e) => src[e..].find('\n').map_or(src.len(), |n| e + n + 1),
            None => spans[i + 1].start,
        };
        cut.push((s.start, end));
    }
    if cut.is_empty() {
        return src.to_string();
    }
    let mut out = String::with_capacity(src.len());
    let mut pos = 0;
    for (a, b) in cut {
        out.push_str(&src[pos..a]);
        pos = b;
    }
    out.push_str(&src[pos..]);
    out
}
