//! Pre-compile lint for SystemVerilog constructs that a Verilog-2001
//! compiler rejects.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, TokenKind};

const SV_KEYWORDS: &[&str] = &[
    "logic", "bit", "byte", "shortint", "longint", "int", "always_ff", "always_comb", "always_latch",
    "typedef", "enum", "struct", "union", "interface", "endinterface", "modport", "unique", "priority",
    "automatic", "final", "assert", "property", "endproperty", "sequence", "endsequence", "class",
    "endclass", "package", "endpackage", "import", "void", "return", "break", "continue", "foreach",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintWarning {
    pub token: String,
    pub line: usize,
    pub offset: usize,
}

impl core::fmt::Display for LintWarning {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "line {}: SystemVerilog construct `{}` is not Verilog-2001", self.line, self.token)
    }
}

pub fn lint_systemverilog(src: &str) -> Vec<LintWarning> {
    let toks = tokenize(src);
    let mut out = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        let hit = match t.kind {
            TokenKind::Ident => SV_KEYWORDS.contains(&t.text),
            TokenKind::Symbol => t.text == "'{" || t.text == "++" || t.text == "+=" || t.text == "-=" || t.text == "::",
            _ => false,
        };
        // `'0` / `'1` fill literals lex as a bare apostrophe followed by a number
        let fill = t.is_symbol("'") && toks.get(i + 1).is_some_and(|n| n.kind == TokenKind::Number && n.start == t.end);
        if hit || fill {
            let line = src[..t.start].bytes().filter(|b| *b == b'\n').count() + 1;
            out.push(LintWarning { token: t.text.to_string(), line, offset: t.start });
        }
    }
    out
}
