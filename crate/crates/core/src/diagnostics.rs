//! Machine-readable findings about input data.
//!
//! Parsers and validators report per-row problems as [`Diagnostic`]s rather
//! than failing, so inconsistent real-world label files can still be loaded
//! and analyzed. Callers decide whether any diagnostic is fatal.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticCode {
    RbAdjacency,
    OutOfBounds,
    InvalidInterval,
    BadNumber,
    MissingField,
    UnexpectedField,
    UnknownSchema,
    InvalidClass,
    InvalidId,
    DuplicateId,
    FullMismatch,
    ColumnCount,
    Encoding,
    UnknownSegment,
    UnknownVideo,
    SchemaMismatch,
    NotMultiplyAnnotated,
    DuplicateAnnotator,
    ClassMismatch,
    GateNotPassed,
    UnknownSession,
    UnknownSupersede,
    GateAnswerCount,
    UnknownInstance,
    Storage,
    InvalidRequest,
}

impl DiagnosticCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiagnosticCode::RbAdjacency => "rb_adjacency",
            DiagnosticCode::OutOfBounds => "out_of_bounds",
            DiagnosticCode::InvalidInterval => "invalid_interval",
            DiagnosticCode::BadNumber => "bad_number",
            DiagnosticCode::MissingField => "missing_field",
            DiagnosticCode::UnexpectedField => "unexpected_field",
            DiagnosticCode::UnknownSchema => "unknown_schema",
            DiagnosticCode::InvalidClass => "invalid_class",
            DiagnosticCode::InvalidId => "invalid_id",
            DiagnosticCode::DuplicateId => "duplicate_id",
            DiagnosticCode::FullMismatch => "full_mismatch",
            DiagnosticCode::ColumnCount => "column_count",
            DiagnosticCode::Encoding => "encoding",
            DiagnosticCode::UnknownSegment => "unknown_segment",
            DiagnosticCode::UnknownVideo => "unknown_video",
            DiagnosticCode::SchemaMismatch => "schema_mismatch",
            DiagnosticCode::NotMultiplyAnnotated => "not_multiply_annotated",
            DiagnosticCode::DuplicateAnnotator => "duplicate_annotator",
            DiagnosticCode::ClassMismatch => "class_mismatch",
            DiagnosticCode::GateNotPassed => "gate_not_passed",
            DiagnosticCode::UnknownSession => "unknown_session",
            DiagnosticCode::UnknownSupersede => "unknown_supersede",
            DiagnosticCode::GateAnswerCount => "gate_answer_count",
            DiagnosticCode::UnknownInstance => "unknown_instance",
            DiagnosticCode::Storage => "storage",
            DiagnosticCode::InvalidRequest => "invalid_request",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based line in the source file, when the finding came from a file.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub line: Option<u64>,
    pub code: DiagnosticCode,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: DiagnosticCode, message: impl Into<String>) -> Self {
        Self {
            line: None,
            code,
            message: message.into(),
        }
    }

    pub fn at_line(mut self, line: u64) -> Self {
        self.line = Some(line);
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: [{}] {}", self.code, self.message),
            None => write!(f, "[{}] {}", self.code, self.message),
        }
    }
}
