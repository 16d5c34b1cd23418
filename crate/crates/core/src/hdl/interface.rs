//! Module discovery and header-level interface extraction.
//!
//! Handles ANSI headers (`module m (input wire [7:0] a, ...)`) and the older
//! non-ANSI style where the header only lists names and directions live in
//! the body. Nothing past the header is needed for ANSI modules, so garbage
//! in a module body cannot disturb an ANSI port list.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::lexer::{number_value, tokenize, Token, TokenKind};
use super::HdlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        }
    }

    fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "input" => Some(Direction::Input),
            "output" => Some(Direction::Output),
            "inout" => Some(Direction::Inout),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortDesc {
    pub name: String,
    pub direction: Direction,
    pub width: u32,
    pub is_reg: bool,
}

/// The externally visible interface of one parsed module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceDesc {
    pub module_name: String,
    pub ports: Vec<PortDesc>,
}

impl InterfaceDesc {
    pub fn port(&self, name: &str) -> Option<&PortDesc> {
        self.ports.iter().find(|p| p.name == name)
    }

    /// Pretty-prints the interface as an ANSI module header with an empty body.
    pub fn emit(&self) -> String {
        let mut out = format!("module {}", self.module_name);
        if self.ports.is_empty() {
            out.push_str(";\nendmodule\n");
            return out;
        }
        out.push_str(" (\n");
        for (i, p) in self.ports.iter().enumerate() {
            let kind = if p.is_reg { "reg " } else { "wire" };
            let range = if p.width > 1 { format!(" [{}:0]", p.width - 1) } else { String::new() };
            let sep = if i + 1 == self.ports.len() { "" } else { "," };
            out.push_str(&format!("    {} {}{} {}{}\n", p.direction.keyword(), kind, range, p.name, sep));
        }
        out.push_str(");\nendmodule\n");
        out
    }
}

/// Location of a `module ... endmodule` span in source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleSpan {
    pub name: String,
    /// Byte offset of the `module` keyword.
    pub start: usize,
    /// Byte offset just past `endmodule`, if present.
    pub end: Option<usize>,
    /// Byte range of the module name token.
    pub name_range: (usize, usize),
}

impl ModuleSpan {
    pub fn is_complete(&self) -> bool {
        self.end.is_some()
    }
}

fn is_module_keyword(t: &Token<'_>) -> bool {
    t.is_ident("module") || t.is_ident("macromodule")
}

/// Finds every module declaration. A module without `endmodule` ends where the
/// next one begins (or at end of input) and is reported as incomplete.
pub fn find_modules(src: &str) -> Vec<ModuleSpan> {
    let toks = tokenize(src);
    let mut spans = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if !is_module_keyword(&toks[i]) {
            i += 1;
            continue;
        }
        let start = toks[i].start;
        let (name, name_range) = match toks.get(i + 1) {
            Some(t) if t.is_name() => (t.text.to_string(), (t.start, t.end)),
            _ => {
                i += 1;
                continue;
            }
        };
        let mut j = i + 2;
        let mut end = None;
        while j < toks.len() {
            if toks[j].is_ident("endmodule") {
                end = Some(toks[j].end);
                j += 1;
                break;
            }
            if is_module_keyword(&toks[j]) {
                break;
            }
            j += 1;
        }
        spans.push(ModuleSpan { name, start, end, name_range });
        i = j;
    }
    spans
}

/// Names of modules instantiated inside `span` that appear in `known`.
pub fn instantiated_modules(src: &str, span: &ModuleSpan, known: &[&str]) -> Vec<String> {
    let end = span.end.unwrap_or(src.len());
    let toks = tokenize(&src[span.start..end]);
    let mut out: Vec<String> = Vec::new();
    for w in toks.windows(2).skip(2) {
        if w[0].is_name() && known.contains(&w[0].text) && (w[1].is_name() || w[1].is_symbol("#")) && !out.iter().any(|n| n == w[0].text) {
            out.push(w[0].text.to_string());
        }
    }
    out
}

/// Parses the port interface of every module in `source`.
pub fn parse_module_interface(source: &str) -> Result<Vec<InterfaceDesc>, HdlError> {
    let toks = tokenize(source);
    let defines = collect_defines(&toks);
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if !is_module_keyword(&toks[i]) {
            i += 1;
            continue;
        }
        let (desc, next) = HeaderParser { toks: &toks, pos: i + 1, defines: &defines, params: BTreeMap::new() }
            .parse_module(source.len())?;
        out.push(desc);
        i = next.max(i + 1);
    }
    if out.is_empty() {
        return Err(HdlError::NoModule);
    }
    Ok(out)
}

fn collect_defines(toks: &[Token<'_>]) -> BTreeMap<String, i64> {
    let mut defines = BTreeMap::new();
    for t in toks.iter().filter(|t| t.kind == TokenKind::Directive) {
        let mut words = t.text[1..].split_whitespace();
        if words.next() != Some("define") {
            continue;
        }
        if let (Some(name), Some(value)) = (words.next(), words.next()) {
            if let Some(v) = number_value(value) {
                defines.insert(name.to_string(), v);
            }
        }
    }
    defines
}

struct HeaderParser<'t, 'a> {
    toks: &'t [Token<'a>],
    pos: usize,
    defines: &'t BTreeMap<String, i64>,
    params: BTreeMap<String, i64>,
}

struct PendingPort {
    name: String,
    direction: Option<Direction>,
    width: u32,
    is_reg: bool,
}

impl<'t, 'a> HeaderParser<'t, 'a> {
    fn peek(&self) -> Option<&'t Token<'a>> {
        self.toks.get(self.pos)
    }

    fn offset(&self, eof: usize) -> usize {
        self.peek().map_or(eof, |t| t.start)
    }

    fn error(&self, eof: usize, message: &str) -> HdlError {
        HdlError::Parse { offset: self.offset(eof), message: message.to_string() }
    }

    fn eat_symbol(&mut self, sym: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_symbol(sym)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_module(mut self, eof: usize) -> Result<(InterfaceDesc, usize), HdlError> {
        let name = match self.peek() {
            Some(t) if t.is_name() => t.text.to_string(),
            _ => return Err(self.error(eof, "expected module name")),
        };
        self.pos += 1;
        if self.eat_symbol("#") {
            if !self.eat_symbol("(") {
                return Err(self.error(eof, "expected '(' after '#'"));
            }
            self.parse_parameter_list(eof)?;
        }
        let mut ports: Vec<PendingPort> = Vec::new();
        let mut ansi = false;
        if self.eat_symbol("(") {
            if self.eat_symbol(")") {
                // empty list
            } else if self.peek().is_some_and(|t| Direction::from_keyword(t.text).is_some()) {
                ansi = true;
                self.parse_ansi_ports(&mut ports, eof)?;
            } else {
                self.parse_name_list(&mut ports, eof)?;
            }
        }
        if !self.eat_symbol(";") {
            return Err(self.error(eof, "expected ';' after module header"));
        }
        let body_start = self.pos;
        let body_end = self.body_end();
        if !ansi {
            // Body declarations are best effort: a bad statement is skipped, never fatal.
            self.scan_body(&mut ports, body_start, body_end);
        }
        let ports = ports
            .into_iter()
            .filter_map(|p| {
                Some(PortDesc { name: p.name, direction: p.direction?, width: p.width, is_reg: p.is_reg })
            })
            .collect();
        Ok((InterfaceDesc { module_name: name, ports }, body_end))
    }

    fn body_end(&self) -> usize {
        let mut j = self.pos;
        while j < self.toks.len() {
            if self.toks[j].is_ident("endmodule") {
                return j + 1;
            }
            if is_module_keyword(&self.toks[j]) {
                return j;
            }
            j += 1;
        }
        j
    }

    fn parse_parameter_list(&mut self, eof: usize) -> Result<(), HdlError> {
        loop {
            match self.peek() {
                None => return Err(self.error(eof, "unterminated parameter list")),
                Some(t) if t.is_symbol(")") => {
                    self.pos += 1;
                    return Ok(());
                }
                Some(t) if t.is_ident("parameter") || t.is_ident("localparam") || t.is_symbol(",") => {
                    self.pos += 1;
                }
                Some(_) => self.parse_param_assignment(&[",", ")"], eof)?,
            }
        }
    }

    /// Parses `[type] [range] NAME = expr`, stopping before any terminator.
    fn parse_param_assignment(&mut self, terminators: &[&str], eof: usize) -> Result<(), HdlError> {
        while self.peek().is_some_and(|t| matches!(t.text, "integer" | "signed" | "real" | "unsigned")) {
            self.pos += 1;
        }
        if self.peek().is_some_and(|t| t.is_symbol("[")) {
            self.parse_range(eof)?;
        }
        let name = match self.peek() {
            Some(t) if t.is_name() => t.text.to_string(),
            _ => return Err(self.error(eof, "expected parameter name")),
        };
        self.pos += 1;
        if !self.eat_symbol("=") {
            return Err(self.error(eof, "expected '=' in parameter assignment"));
        }
        let start = self.pos;
        let mut depth = 0i32;
        while let Some(t) = self.peek() {
            if depth == 0 && t.kind == TokenKind::Symbol && terminators.contains(&t.text) {
                break;
            }
            match t.text {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                _ => {}
            }
            self.pos += 1;
        }
        if let Some(v) = self.eval(&self.toks[start..self.pos]) {
            self.params.insert(name, v);
        }
        Ok(())
    }

    fn parse_ansi_ports(&mut self, ports: &mut Vec<PendingPort>, eof: usize) -> Result<(), HdlError> {
        let mut direction = None;
        let mut width = 1;
        let mut is_reg = false;
        loop {
            let Some(t) = self.peek() else {
                return Err(self.error(eof, "unterminated port list"));
            };
            if let Some(d) = Direction::from_keyword(t.text).filter(|_| t.kind == TokenKind::Ident) {
                self.pos += 1;
                direction = Some(d);
                is_reg = false;
                width = 1;
                while let Some(t) = self.peek() {
                    match t.text {
                        "reg" => is_reg = true,
                        "logic" => is_reg = true,
                        "wire" | "tri" | "signed" | "unsigned" | "supply0" | "supply1" | "wand" | "wor" => {}
                        "integer" => width = 32,
                        _ => break,
                    }
                    self.pos += 1;
                }
                if self.peek().is_some_and(|t| t.is_symbol("[")) {
                    width = self.parse_range(eof)?;
                }
                continue;
            }
            if t.is_name() {
                if direction.is_none() {
                    return Err(self.error(eof, "port declared without a direction"));
                }
                ports.push(PendingPort { name: t.text.to_string(), direction, width, is_reg });
                self.pos += 1;
                // unpacked dimensions are not ports' concern; skip them
                while self.peek().is_some_and(|t| t.is_symbol("[")) {
                    self.parse_range(eof)?;
                }
                if self.eat_symbol(",") {
                    continue;
                }
                if self.eat_symbol(")") {
                    return Ok(());
                }
                return Err(self.error(eof, "expected ',' or ')' in port list"));
            }
            return Err(self.error(eof, "unexpected token in port list"));
        }
    }

    fn parse_name_list(&mut self, ports: &mut Vec<PendingPort>, eof: usize) -> Result<(), HdlError> {
        loop {
            match self.peek() {
                Some(t) if t.is_name() => {
                    ports.push(PendingPort { name: t.text.to_string(), direction: None, width: 1, is_reg: false });
                    self.pos += 1;
                }
                Some(t) if t.is_symbol(",") => self.pos += 1,
                Some(t) if t.is_symbol(")") => {
                    self.pos += 1;
                    return Ok(());
                }
                _ => return Err(self.error(eof, "expected port name")),
            }
        }
    }

    /// Parses `[msb:lsb]` and returns the width.
    fn parse_range(&mut self, eof: usize) -> Result<u32, HdlError> {
        let open = self.offset(eof);
        self.pos += 1; // '['
        let start = self.pos;
        let mut depth = 0i32;
        let mut colon = None;
        loop {
            let Some(t) = self.peek() else {
                return Err(HdlError::Parse { offset: open, message: "unterminated range".to_string() });
            };
            match t.text {
                "[" | "(" | "{" => depth += 1,
                ")" | "}" => depth -= 1,
                "]" if depth == 0 => break,
                "]" => depth -= 1,
                ":" if depth == 0 && colon.is_none() => colon = Some(self.pos),
                _ => {}
            }
            self.pos += 1;
        }
        let end = self.pos;
        self.pos += 1; // ']'
        let Some(colon) = colon else {
            return Err(HdlError::Parse { offset: open, message: "expected ':' in range".to_string() });
        };
        let msb = self.eval(&self.toks[start..colon]);
        let lsb = self.eval(&self.toks[colon + 1..end]);
        match (msb, lsb) {
            (Some(m), Some(l)) => Ok(((m - l).unsigned_abs() + 1) as u32),
            _ => Err(HdlError::Parse { offset: open, message: "range bounds are not constant".to_string() }),
        }
    }

    fn scan_body(&mut self, ports: &mut [PendingPort], start: usize, end: usize) {
        let mut j = start;
        while j < end {
            let t = &self.toks[j];
            if t.kind != TokenKind::Ident {
                j += 1;
                continue;
            }
            if t.text == "parameter" || t.text == "localparam" {
                self.pos = j + 1;
                while self.pos < end {
                    if self.parse_param_assignment(&[",", ";"], end).is_err() {
                        break;
                    }
                    if !self.eat_symbol(",") {
                        break;
                    }
                }
                j = self.pos.max(j + 1);
                continue;
            }
            let direction = Direction::from_keyword(t.text);
            if direction.is_none() && t.text != "reg" {
                j += 1;
                continue;
            }
            self.pos = j + 1;
            let mut is_reg = t.text == "reg";
            let mut width = None;
            while let Some(t) = self.peek() {
                match t.text {
                    "reg" => is_reg = true,
                    "wire" | "signed" | "unsigned" | "tri" => {}
                    "integer" => width = Some(32),
                    _ => break,
                }
                self.pos += 1;
            }
            if self.peek().is_some_and(|t| t.is_symbol("[")) {
                match self.parse_range(end) {
                    Ok(w) => width = Some(w),
                    Err(_) => {
                        j = self.pos.max(j + 1);
                        continue;
                    }
                }
            }
            while self.pos < end {
                let Some(t) = self.peek() else { break };
                if t.is_name() {
                    if let Some(p) = ports.iter_mut().find(|p| p.name == t.text) {
                        if let Some(d) = direction {
                            p.direction = Some(d);
                            if let Some(w) = width {
                                p.width = w;
                            }
                        } else if width.is_none() || Some(p.width) == width || p.direction.is_none() {
                            if let Some(w) = width {
                                p.width = w;
                            }
                        }
                        if is_reg {
                            p.is_reg = true;
                        }
                    }
                    self.pos += 1;
                    if !self.eat_symbol(",") {
                        break;
                    }
                } else {
                    break;
                }
            }
            j = self.pos.max(j + 1);
        }
    }

    fn eval(&self, toks: &[Token<'_>]) -> Option<i64> {
        let mut ev = ConstEval { toks, pos: 0, parser: self };
        let v = ev.expr()?;
        (ev.pos == toks.len()).then_some(v)
    }

    fn lookup(&self, name: &str) -> Option<i64> {
        self.params.get(name).copied()
    }
}

/// Tiny constant-expression evaluator for range bounds.
struct ConstEval<'x, 't, 'a> {
    toks: &'x [Token<'x>],
    pos: usize,
    parser: &'x HeaderParser<'t, 'a>,
}

impl ConstEval<'_, '_, '_> {
    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(|t| t.text)
    }

    fn expr(&mut self) -> Option<i64> {
        let mut v = self.term()?;
        while let Some(op) = self.peek() {
            match op {
                "+" => {
                    self.pos += 1;
                    v = v.checked_add(self.term()?)?;
                }
                "-" => {
                    self.pos += 1;
                    v = v.checked_sub(self.term()?)?;
                }
                _ => break,
            }
        }
        Some(v)
    }

    fn term(&mut self) -> Option<i64> {
        let mut v = self.factor()?;
        while let Some(op) = self.peek() {
            match op {
                "*" => {
                    self.pos += 1;
                    v = v.checked_mul(self.factor()?)?;
                }
                "/" => {
                    self.pos += 1;
                    v = v.checked_div(self.factor()?)?;
                }
                "%" => {
                    self.pos += 1;
                    v = v.checked_rem(self.factor()?)?;
                }
                _ => break,
            }
        }
        Some(v)
    }

    fn factor(&mut self) -> Option<i64> {
        let t = self.toks.get(self.pos)?;
        self.pos += 1;
        match t.kind {
            TokenKind::Number => number_value(t.text),
            TokenKind::Ident | TokenKind::EscapedIdent => self.parser.lookup(t.text),
            TokenKind::Directive => {
                let name = t.text[1..].split_whitespace().next()?;
                self.parser.defines.get(name).copied()
            }
            TokenKind::Symbol if t.text == "-" => self.factor().map(|v| -v),
            TokenKind::Symbol if t.text == "(" => {
                let v = self.expr()?;
                (self.peek() == Some(")")).then(|| self.pos += 1)?;
                Some(v)
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHIFT_REGISTER_DESIGN: &str = "module shift_register (
    input wire clk,
    input wire reset_n,
    input wire data_in,
    input wire shift_enable,
    output reg [7:0] data_out
);

always @(posedge clk or negedge reset_n) begin
    if (!reset_n) begin
        data_out <= 8'b0; // Active-low reset: Clear the register when reset_n is low
    end else if (shift_enable) begin
        data_out <= {data_out[6:0], data_in}; // Shift the register and insert the new data bit
    end
end

endmodule
";

    fn triples(d: &InterfaceDesc) -> Vec<(&str, Direction, u32)> {
        d.ports.iter().map(|p| (p.name.as_str(), p.direction, p.width)).collect()
    }

    #[test]
    fn ansi_header() {
        let mods = parse_module_interface(SHIFT_REGISTER_DESIGN).unwrap();
        assert_eq!(mods.len(), 1);
        assert_eq!(mods[0].module_name, "shift_register");
        assert_eq!(
            triples(&mods[0]),
            [
                ("clk", Direction::Input, 1),
                ("reset_n", Direction::Input, 1),
                ("data_in", Direction::Input, 1),
                ("shift_enable", Direction::Input, 1),
                ("data_out", Direction::Output, 8),
            ]
        );
        assert!(mods[0].ports[4].is_reg);
        assert!(!mods[0].ports[0].is_reg);
    }

    #[test]
    fn non_ansi_header() {
        let src = "module m(a, b, q);\n  parameter W = 4;\n  input a;\n  input [W-1:0] b;\n  output q;\n  reg q;\nendmodule";
        let mods = parse_module_interface(src).unwrap();
        assert_eq!(triples(&mods[0]), [("a", Direction::Input, 1), ("b", Direction::Input, 4), ("q", Direction::Output, 1)]);
        assert!(mods[0].ports[2].is_reg);
    }

    #[test]
    fn parameterised_ansi_header() {
        let src = "module p #(parameter WIDTH = 8, parameter DEPTH = 2) (input [WIDTH-1:0] d, output [(WIDTH*DEPTH)-1:0] q);\nendmodule";
        let mods = parse_module_interface(src).unwrap();
        assert_eq!(triples(&mods[0]), [("d", Direction::Input, 8), ("q", Direction::Output, 16)]);
    }

    #[test]
    fn define_in_range() {
        let src = "`define W 6\nmodule p (input [`W-1:0] d);\nendmodule";
        assert_eq!(parse_module_interface(src).unwrap()[0].ports[0].width, 6);
    }

    #[test]
    fn shared_direction_in_ansi_list() {
        let src = "module s(input clk, rst, input [2:0] a, b, output reg o);\nendmodule";
        let mods = parse_module_interface(src).unwrap();
        assert_eq!(
            triples(&mods[0]),
            [
                ("clk", Direction::Input, 1),
                ("rst", Direction::Input, 1),
                ("a", Direction::Input, 3),
                ("b", Direction::Input, 3),
                ("o", Direction::Output, 1),
            ]
        );
    }

    #[test]
    fn empty_module() {
        let mods = parse_module_interface("module m; endmodule").unwrap();
        assert_eq!(mods[0].module_name, "m");
        assert!(mods[0].ports.is_empty());
    }

    #[test]
    fn zero_modules_is_not_found() {
        assert_eq!(parse_module_interface("wire x;"), Err(HdlError::NoModule));
    }

    #[test]
    fn bad_header_reports_offset() {
        let src = "module m (input a, input b c);";
        match parse_module_interface(src) {
            Err(HdlError::Parse { offset, .. }) => assert_eq!(&src[offset..offset + 1], "c"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_survives_garbage_body() {
        let src = "module ShiftRegister(input clk, input rst_n, input data_in, input shft_en, output reg [7:0] q);\n\n\
                   assign data_out = ~data_in & shft_en ? 1'b0 : (q[7:1] << 1);\n always @(*) begin\n # /* x */ CLK *;\n `#addr `addr:`addr[(int*) &POS]\n";
        let mods = parse_module_interface(src).unwrap();
        assert_eq!(mods[0].module_name, "ShiftRegister");
        assert_eq!(mods[0].ports.len(), 5);
        assert_eq!(mods[0].ports[4].width, 8);
    }

    #[test]
    fn multiple_modules_and_spans() {
        let src = "module a(input x); endmodule\nmodule tb; a u(.x(1'b0)); endmodule\nmodule c(";
        let spans = find_modules(src);
        assert_eq!(spans.len(), 3);
        assert!(spans[0].is_complete() && spans[1].is_complete() && !spans[2].is_complete());
        assert_eq!(&src[spans[1].start..spans[1].end.unwrap()], "module tb; a u(.x(1'b0)); endmodule");
        assert_eq!(instantiated_modules(src, &spans[1], &["a"]), ["a"]);
    }

    #[test]
    fn emit_round_trips() {
        let d = &parse_module_interface(SHIFT_REGISTER_DESIGN).unwrap()[0];
        let again = &parse_module_interface(&d.emit()).unwrap()[0];
        assert_eq!(d, again);
    }
}
