//! Array configurations and the `.xcfg` text format.

mod diag;
mod emit;
mod lexer;
mod model;
mod parser;
mod validate;

pub use diag::{has_errors, DiagCode, Diagnostic, Severity, Span};
pub use emit::{emit, emit_many};
pub use model::*;
pub use parser::{parse, parse_many, parse_with_map, AluSpans, ChannelSpans, RamSpans, SourceMap, StreamSpans};
pub use validate::{check_structure, resolve_port, validate, validate_with_map, Element, PortKind};

/// Keywords recognized at statement or clause level.
pub const KEYWORDS: &[&str] = &[
    "array", "alu", "ram", "cap", "name", "pae", "at", "op", "imm", "in", "out", "mode", "fifo", "left", "right",
    "preload", "words", "dma", "base", "l3", "l2", "l1", "l0", "stream", "connect",
];
