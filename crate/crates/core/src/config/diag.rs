use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

/// Source location: 1-based line, 1-based column range `[col_start, col_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub line: usize,
    pub col_start: usize,
    pub col_end: usize,
}

impl Span {
    pub fn new(line: usize, col_start: usize, col_end: usize) -> Self {
        Self { line, col_start, col_end }
    }

    pub fn to(self, other: Span) -> Span {
        if self.line != other.line {
            return self;
        }
        Span {
            line: self.line,
            col_start: self.col_start.min(other.col_start),
            col_end: self.col_end.max(other.col_end),
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}-{}", self.line, self.col_start, self.col_end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiagCode {
    Lex,
    Syntax,
    Header,
    IntRange,
    UnknownOpcode,
    Arity,
    Immediate,
    PortName,
    Placement,
    DuplicatePlacement,
    DuplicateName,
    UnknownElement,
    UnknownPort,
    Direction,
    Resource,
    MultipleDrivers,
    FanOut,
    Undriven,
    RamCapacity,
    Unreachable,
    UnusedOutput,
}

impl DiagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::Lex => "E001",
            DiagCode::Syntax => "E002",
            DiagCode::Header => "E003",
            DiagCode::IntRange => "E004",
            DiagCode::UnknownOpcode => "E010",
            DiagCode::Arity => "E011",
            DiagCode::Immediate => "E012",
            DiagCode::PortName => "E013",
            DiagCode::Placement => "E020",
            DiagCode::DuplicatePlacement => "E021",
            DiagCode::DuplicateName => "E022",
            DiagCode::UnknownElement => "E030",
            DiagCode::UnknownPort => "E031",
            DiagCode::Direction => "E032",
            DiagCode::Resource => "E040",
            DiagCode::MultipleDrivers => "E041",
            DiagCode::FanOut => "E042",
            DiagCode::Undriven => "E043",
            DiagCode::RamCapacity => "E044",
            DiagCode::Unreachable => "W050",
            DiagCode::UnusedOutput => "W051",
        }
    }
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagCode,
    /// Absent for configurations built in code rather than parsed.
    pub span: Option<Span>,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: DiagCode, span: Option<Span>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, code, span, message: message.into() }
    }

    pub fn warning(code: DiagCode, span: Option<Span>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, code, span, message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.span {
            Some(s) => write!(f, "{sev}[{}] {s}: {}", self.code, self.message),
            None => write!(f, "{sev}[{}]: {}", self.code, self.message),
        }
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}
