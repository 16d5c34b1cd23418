//! A forgiving Verilog tokenizer.
//!
//! Only what header extraction and structure checks need: identifiers,
//! numbers, punctuation, strings and compiler directives. Comments and
//! attribute instances are skipped. Unterminated comments or strings run to
//! end of input rather than failing, since chat output is often truncated.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    /// Escaped identifier (`\foo+bar `); the text excludes the backslash.
    EscapedIdent,
    Number,
    Str,
    /// A compiler directive such as `` `define ``; text runs to end of line.
    Directive,
    Symbol,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// Byte offset of the first character.
    pub start: usize,
    /// Byte offset one past the last character.
    pub end: usize,
}

impl<'a> Token<'a> {
    pub fn is_ident(&self, word: &str) -> bool {
        self.kind == TokenKind::Ident && self.text == word
    }

    pub fn is_symbol(&self, sym: &str) -> bool {
        self.kind == TokenKind::Symbol && self.text == sym
    }

    pub fn is_name(&self) -> bool {
        matches!(self.kind, TokenKind::Ident | TokenKind::EscapedIdent)
    }
}

const MULTI_SYMBOLS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "**", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "~&", "~|",
    "~^", "^~", "->", "+:", "-:", "++", "--", "+=", "-=", "::", "'{",
];

/// Directives whose argument runs to end of line. Any other backtick word is
/// a macro use and lexes as just `` `NAME ``.
const LINE_DIRECTIVES: &[&str] = &[
    "define", "undef", "include", "timescale", "ifdef", "ifndef", "elsif", "else", "endif",
    "default_nettype", "resetall", "celldefine", "endcelldefine", "line", "pragma",
    "unconnected_drive", "nounconnected_drive", "begin_keywords", "end_keywords",
];

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_continue(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$'
}

pub fn tokenize(src: &str) -> Vec<Token<'_>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            i += 2;
            while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                i += 1;
            }
            i = (i + 2).min(bytes.len());
            continue;
        }
        // attribute instance (* ... *), but not the sensitivity list @(*)
        if c == b'(' && bytes.get(i + 1) == Some(&b'*') && bytes.get(i + 2) != Some(&b')') {
            let prev = out.last().map(|t: &Token<'_>| t.text);
            if prev != Some("@") {
                i += 2;
                while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b')')) {
                    i += 1;
                }
                i = (i + 2).min(bytes.len());
                continue;
            }
        }
        let start = i;
        if c == b'"' {
            i += 1;
            while i < bytes.len() && bytes[i] != b'"' && bytes[i] != b'\n' {
                if bytes[i] == b'\\' {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(bytes.len());
            out.push(tok(src, TokenKind::Str, start, i));
            continue;
        }
        if c == b'`' {
            i += 1;
            while i < bytes.len() && is_ident_continue(bytes[i]) {
                i += 1;
            }
            if !LINE_DIRECTIVES.contains(&&src[start + 1..i]) {
                out.push(tok(src, TokenKind::Directive, start, i));
                continue;
            }
            while i < bytes.len() && bytes[i] != b'\n' {
                if bytes[i] == b'\\' && bytes.get(i + 1) == Some(&b'\n') {
                    i += 1;
                }
                i += 1;
            }
            out.push(tok(src, TokenKind::Directive, start, i));
            continue;
        }
        if c == b'\\' {
            i += 1;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            out.push(Token { kind: TokenKind::EscapedIdent, text: &src[start + 1..i], start, end: i });
            continue;
        }
        if is_ident_start(c) || c == b'$' {
            i += 1;
            while i < bytes.len() && is_ident_continue(bytes[i]) {
                i += 1;
            }
            out.push(tok(src, TokenKind::Ident, start, i));
            continue;
        }
        if c.is_ascii_digit() || (c == b'\'' && bytes.get(i + 1).is_some_and(|b| is_base_char(*b))) {
            i = scan_number(bytes, i);
            out.push(tok(src, TokenKind::Number, start, i));
            continue;
        }
        if let Some(sym) = MULTI_SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            i += sym.len();
            out.push(tok(src, TokenKind::Symbol, start, i));
            continue;
        }
        // one symbol per char; step over a whole UTF-8 sequence for non-ASCII
        let width = src[i..].chars().next().map_or(1, char::len_utf8);
        i += width;
        out.push(tok(src, TokenKind::Symbol, start, i));
    }
    out
}

fn tok(src: &str, kind: TokenKind, start: usize, end: usize) -> Token<'_> {
    Token { kind, text: &src[start..end], start, end }
}

fn is_base_char(b: u8) -> bool {
    matches!(b.to_ascii_lowercase(), b'b' | b'o' | b'd' | b'h' | b's')
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    // size
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
        i += 1;
    }
    // optional real fraction
    if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
        i += 1;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
            i += 1;
        }
    }
    let mut j = i;
    while j < bytes.len() && (bytes[j] == b' ' || bytes[j] == b'\t') {
        j += 1;
    }
    if j < bytes.len() && bytes[j] == b'\'' {
        j += 1;
        if j < bytes.len() && (bytes[j] == b's' || bytes[j] == b'S') {
            j += 1;
        }
        if j < bytes.len() && is_base_char(bytes[j]) {
            j += 1;
            while j < bytes.len() && (bytes[j] == b' ' || bytes[j] == b'\t') {
                j += 1;
            }
            while j < bytes.len() && (bytes[j].is_ascii_hexdigit() || matches!(bytes[j], b'_' | b'x' | b'X' | b'z' | b'Z' | b'?')) {
                j += 1;
            }
            return j;
        }
    }
    i
}

/// Evaluates an unsized or sized Verilog integer literal. Returns `None` for
/// literals containing x/z digits or values that overflow `i64`.
pub fn number_value(text: &str) -> Option<i64> {
    let cleaned: String = text.chars().filter(|c| *c != '_' && !c.is_whitespace()).collect();
    match cleaned.find('\'') {
        None => cleaned.parse().ok(),
        Some(q) => {
            let rest = cleaned[q + 1..].trim_start_matches(['s', 'S']);
            let mut chars = rest.chars();
            let radix = match chars.next()?.to_ascii_lowercase() {
                'b' => 2,
                'o' => 8,
                'd' => 10,
                'h' => 16,
                _ => return None,
            };
            i64::from_str_radix(chars.as_str(), radix).ok()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, &str)> {
        tokenize(src).into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn skips_comments_and_attributes() {
        let toks = kinds("(* keep *) wire a; // note\n/* block */ reg b;");
        assert_eq!(
            toks,
            [
                (TokenKind::Ident, "wire"),
                (TokenKind::Ident, "a"),
                (TokenKind::Symbol, ";"),
                (TokenKind::Ident, "reg"),
                (TokenKind::Ident, "b"),
                (TokenKind::Symbol, ";"),
            ]
        );
    }

    #[test]
    fn keeps_star_sensitivity() {
        let toks = kinds("always @(*) x = 1;");
        assert!(toks.contains(&(TokenKind::Symbol, "*")));
    }

    #[test]
    fn sized_numbers() {
        let toks = kinds("8'b1010_0000 + 'hFF + 12 + 4 'd 9");
        let nums: Vec<_> = toks.iter().filter(|t| t.0 == TokenKind::Number).map(|t| t.1).collect();
        assert_eq!(nums, ["8'b1010_0000", "'hFF", "12", "4 'd 9"]);
        assert_eq!(number_value("8'b1010_0000"), Some(0xa0));
        assert_eq!(number_value("'hFF"), Some(255));
        assert_eq!(number_value("4 'd 9"), Some(9));
        assert_eq!(number_value("4'bx01"), None);
    }

    #[test]
    fn unterminated_comment_runs_to_end() {
        assert!(kinds("module m; /* never closed").len() == 3);
    }

    #[test]
    fn directives_and_strings() {
        let toks = kinds("`define W 8\n$display(\"a \\\" b\");");
        assert_eq!(toks[0], (TokenKind::Directive, "`define W 8"));
        assert_eq!(toks[1], (TokenKind::Ident, "$display"));
        assert_eq!(toks[3], (TokenKind::Str, "\"a \\\" b\""));
        let toks = kinds("[`W-1:0]");
        assert_eq!(toks[1], (TokenKind::Directive, "`W"));
        assert_eq!(toks[2], (TokenKind::Symbol, "-"));
    }

    #[test]
    fn non_ascii_symbols_do_not_split_chars() {
        let toks = kinds("a ✓ b");
        assert_eq!(toks[1], (TokenKind::Symbol, "✓"));
    }
}
