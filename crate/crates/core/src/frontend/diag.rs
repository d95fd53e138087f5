use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    Syntax { expected: String, found: String },
    Resolution { symbol: String },
    Duplicate { symbol: String },
    NoInitialLocation,
    Invalid(String),
}

/// A single parse or validation problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<u32>,
    pub col: Option<u32>,
    pub kind: DiagnosticKind,
}

impl Diagnostic {
    pub fn at(line: u32, col: u32, kind: DiagnosticKind) -> Self {
        Diagnostic { line: Some(line), col: Some(col), kind }
    }

    pub fn global(kind: DiagnosticKind) -> Self {
        Diagnostic { line: None, col: None, kind }
    }

    pub fn message(&self) -> String {
        match &self.kind {
            DiagnosticKind::Syntax { expected, found } => format!("expected {expected}, found {found}"),
            DiagnosticKind::Resolution { symbol } => format!("unresolved symbol `{symbol}`"),
            DiagnosticKind::Duplicate { symbol } => format!("duplicate declaration of `{symbol}`"),
            DiagnosticKind::NoInitialLocation => "no initial location".to_string(),
            DiagnosticKind::Invalid(m) => m.clone(),
        }
    }

    /// `file:line:col: error: message`
    pub fn render(&self, file: &str) -> String {
        format!("{}:{}:{}: error: {}", file, self.line.unwrap_or(1), self.col.unwrap_or(1), self.message())
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.col) {
            (Some(l), Some(c)) => write!(f, "{l}:{c}: {}", self.message()),
            _ => f.write_str(&self.message()),
        }
    }
}

/// All problems found while reading a model.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn render(&self, file: &str) -> String {
        self.0.iter().map(|d| d.render(file)).collect::<Vec<_>>().join("\n")
    }

    pub fn has(&self, pred: impl Fn(&DiagnosticKind) -> bool) -> bool {
        self.0.iter().any(|d| pred(&d.kind))
    }
}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Self {
        Diagnostics(vec![d])
    }
}
