//! Tracking the working design and testbench across replies.
//!
//! Replies may carry the design, the testbench or both. Modules with ports
//! count as design; port-less modules are testbenches. A reply's design
//! modules replace same-named working modules, and a reply that carries a
//! testbench replaces the working testbench wholesale.

use alloc::string::String;
use alloc::vec::Vec;

use super::extract::CodeBlock;
use super::interface::{find_modules, parse_module_interface};
use super::lexer::{tokenize, TokenKind};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitSource {
    /// Directive lines (`` `timescale ``, `` `define ``) found outside modules.
    pub preamble: String,
    /// (module name, text) of modules with ports.
    pub design: Vec<(String, String)>,
    /// (module name, text) of port-less modules.
    pub testbench: Vec<(String, String)>,
}

fn through_line_end(src: &str, at: usize) -> usize {
    src[at..].find('\n').map_or(src.len(), |n| at + n + 1)
}

pub fn split_source(src: &str) -> SplitSource {
    let spans = find_modules(src);
    let mut out = SplitSource::default();
    let ends: Vec<usize> = spans
        .iter()
        .enumerate()
        .map(|(i, s)| match s.end {
            Some(e) => through_line_end(src, e),
            None => spans.get(i + 1).map_or(src.len(), |n| n.start),
        })
        .collect();
    let inside = |at: usize| spans.iter().zip(&ends).any(|(s, e)| s.start <= at && at < *e);
    for t in tokenize(src).iter().filter(|t| t.kind == TokenKind::Directive && !inside(t.start)) {
        if t.text.starts_with("`timescale") || t.text.starts_with("`define") || t.text.starts_with("`default_nettype") {
            out.preamble.push_str(t.text.trim_end());
            out.preamble.push('\n');
        }
    }
    for (s, &end) in spans.iter().zip(&ends) {
        let text = String::from(&src[s.start..end]);
        let is_tb = parse_module_interface(&text).map(|m| m[0].ports.is_empty()).unwrap_or(false);
        if is_tb {
            out.testbench.push((s.name.clone(), text));
        } else {
            out.design.push((s.name.clone(), text));
        }
    }
    out
}

fn join(preamble: &str, modules: &[(String, String)]) -> String {
    let mut out = String::from(preamble);
    for (i, (_, text)) in modules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(text);
        if !text.ends_with('\n') {
            out.push('\n');
        }
    }
    out
}

/// Joins the Verilog-looking blocks of one reply.
pub fn reply_code(blocks: &[CodeBlock]) -> String {
    let mut out = String::new();
    for b in blocks {
        let has_module = tokenize(&b.text).iter().any(|t| t.kind == TokenKind::Ident && (t.text == "module" || t.text == "endmodule"));
        if !has_module {
            continue;
        }
        if !out.is_empty() && !out.ends_with('\n') {
            out.push('\n');
        }
        out.push_str(&b.text);
    }
    out
}

/// Folds a reply's code into the working (design, testbench) pair.
pub fn merge_sources(design: &str, testbench: &str, reply: &str) -> (String, String) {
    let incoming = split_source(reply);
    let mut current = split_source(design);
    if current.preamble.is_empty() {
        current.preamble = incoming.preamble.clone();
    }
    for (name, text) in &incoming.design {
        match current.design.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = text.clone(),
            None => current.design.push((name.clone(), text.clone())),
        }
    }
    let new_design = if incoming.design.is_empty() { String::from(design) } else { join(&current.preamble, &current.design) };
    let new_tb = if incoming.testbench.is_empty() {
        String::from(testbench)
    } else {
        join(&incoming.preamble, &incoming.testbench)
    };
    (new_design, new_tb)
}

#[cfg(test)]
mod tests {
    use super::*;

    const D1: &str = "module sr(input clk, output reg q);\nendmodule\n";
    const D2: &str = "module sr(input clk, output reg [1:0] q);\nendmodule\n";
    const TB: &str = "`timescale 1ns/1ps\nmodule tb;\n  sr u(.clk(1'b0));\nendmodule\n";

    #[test]
    fn split_classifies_modules() {
        let s = split_source(&alloc::format!("{TB}{D1}"));
        assert_eq!(s.preamble, "`timescale 1ns/1ps\n");
        assert_eq!(s.testbench.len(), 1);
        assert_eq!(s.design, [(String::from("sr"), String::from(D1))]);
    }

    #[test]
    fn merge_replaces_by_role() {
        let (d, t) = merge_sources("", "", D1);
        assert_eq!(d, D1);
        assert_eq!(t, "");
        let (d, t) = merge_sources(&d, &t, TB);
        assert_eq!(d, D1);
        assert_eq!(t, TB);
        let (d2, t2) = merge_sources(&d, &t, D2);
        assert_eq!(d2, D2);
        assert_eq!(t2, TB);
        let both = alloc::format!("{D1}\n{TB}");
        let (d3, t3) = merge_sources(&d2, &t2, &both);
        assert_eq!(d3, alloc::format!("`timescale 1ns/1ps\n{D1}"));
        assert_eq!(t3, "`timescale 1ns/1ps\nmodule tb;\n  sr u(.clk(1'b0));\nendmodule\n");
    }

    #[test]
    fn merge_keeps_other_design_modules() {
        let helper = "module helper(input a, output b);\nassign b = a;\nendmodule\n";
        let (d, _) = merge_sources("", "", &alloc::format!("{helper}\n{D1}"));
        let (d, _) = merge_sources(&d, "", D2);
        assert!(d.contains("module helper"));
        assert!(d.contains("[1:0] q"));
        assert_eq!(find_modules(&d).len(), 2);
    }
}
