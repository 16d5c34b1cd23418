//! Verilog handling at the level the loop needs: pulling code out of chat
//! replies, stitching truncated replies, reading module headers and checking
//! them against a benchmark interface.

pub mod adapter;
pub mod conformance;
pub mod extract;
pub mod interface;
pub mod lexer;
pub mod lint;
pub mod sources;

use alloc::string::String;

pub use conformance::{check_interface, check_interface_with, select_top, ConformanceReport, WidthMismatch};
pub use extract::{assemble_design, detect_truncation, extract_code_blocks, CodeBlock};
pub use interface::{find_modules, parse_module_interface, Direction, InterfaceDesc, ModuleSpan, PortDesc};
pub use lint::{lint_systemverilog, LintWarning};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HdlError {
    #[error("no module declaration found")]
    NoModule,
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("cannot assemble design: {0}")]
    Assembly(String),
}
