use std::fmt;

use super::ast::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagKind {
    Syntax,
    MacroType,
    UnknownModel,
    Name,
    Type,
    FormatOverlap,
    WriteBeforeRead,
    DoubleWrite,
    UnsupportedFeature,
    Import,
}

impl DiagKind {
    pub fn label(self) -> &'static str {
        match self {
            DiagKind::Syntax => "syntax error",
            DiagKind::MacroType => "macro type error",
            DiagKind::UnknownModel => "unknown model",
            DiagKind::Name => "name error",
            DiagKind::Type => "type error",
            DiagKind::FormatOverlap => "format overlap",
            DiagKind::WriteBeforeRead => "write before read",
            DiagKind::DoubleWrite => "double write",
            DiagKind::UnsupportedFeature => "unsupported feature",
            DiagKind::Import => "import error",
        }
    }
}

/// One located diagnostic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diag {
    pub kind: DiagKind,
    pub span: Span,
    pub message: String,
    pub file: Option<String>,
}

impl Diag {
    pub fn new(kind: DiagKind, span: Span, message: impl Into<String>) -> Self {
        Diag {
            kind,
            span,
            message: message.into(),
            file: None,
        }
    }
}

impl fmt::Display for Diag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}:")?;
        }
        write!(f, "{}: {}: {}", self.span, self.kind.label(), self.message)
    }
}

/// A batch of diagnostics from one frontend phase. Never empty.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct SpecError {
    pub diags: Vec<Diag>,
}

impl SpecError {
    pub fn has(&self, kind: DiagKind) -> bool {
        self.diags.iter().any(|d| d.kind == kind)
    }

    pub fn with_file(mut self, file: &str) -> Self {
        for d in &mut self.diags {
            d.file.get_or_insert_with(|| file.to_string());
        }
        self
    }
}

impl From<Diag> for SpecError {
    fn from(d: Diag) -> Self {
        SpecError { diags: vec![d] }
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diags.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}
