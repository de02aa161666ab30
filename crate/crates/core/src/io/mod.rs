//! Parsing, validation, and serialization of every file the toolkit reads or
//! writes. Column orders are fixed; see the `*_HEADER` constants.
//!
//! Row-level problems never abort a parse. They come back as
//! [`Diagnostic`]s next to the rows that did parse. Only a missing or
//! misordered header is fatal.

mod annotations;
mod config;
mod folds;
mod generated;
mod predictions;

pub use annotations::{parse_annotations, serialize_annotations, ParsedAnnotations, ANNOTATION_HEADER};
pub use config::{AugmentationConfig, ControlQuestion, FoldConfig, PerturbationSection, ProjectConfig, ServiceConfig};
pub use folds::{parse_folds, serialize_folds, FOLD_HEADER};
pub use generated::{parse_generated, serialize_generated, ParsedGenerated, GENERATED_HEADER};
pub use predictions::{parse_predictions, serialize_predictions, ParsedPredictions, Prediction, PREDICTION_HEADER};

use crate::diagnostics::{Diagnostic, DiagnosticCode};
use crate::model::VideoMeta;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("empty input: expected header `{expected}`")]
    MissingHeader { expected: String },
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid video metadata: {0}")]
    Video(String),
}

/// Kinds of CSV file the toolkit recognizes by their header line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Annotations,
    Predictions,
    Generated,
    Folds,
}

/// Identifies a CSV file from its first line.
pub fn detect_csv_kind(bytes: &[u8]) -> Option<CsvKind> {
    let first = bytes.split(|&b| b == b'\n').next()?;
    let first = std::str::from_utf8(first).ok()?;
    let first = first.trim_start_matches('\u{feff}').trim_end_matches('\r');
    let fields: Vec<&str> = first.split(',').map(str::trim).collect();
    [
        (&ANNOTATION_HEADER[..], CsvKind::Annotations),
        (&PREDICTION_HEADER[..], CsvKind::Predictions),
        (&GENERATED_HEADER[..], CsvKind::Generated),
        (&FOLD_HEADER[..], CsvKind::Folds),
    ]
    .into_iter()
    .find(|(h, _)| fields == *h)
    .map(|(_, k)| k)
}

/// Reads a JSON array of video metadata.
pub fn parse_videos(bytes: &[u8]) -> Result<Vec<VideoMeta>, IoError> {
    let videos: Vec<VideoMeta> = serde_json::from_slice(bytes)?;
    for v in &videos {
        v.validate().map_err(|e| IoError::Video(e.to_string()))?;
    }
    Ok(videos)
}

/// One decoded data row and its 1-based line number.
pub(crate) struct Row {
    pub line: u64,
    pub fields: Vec<String>,
}

/// Splits `bytes` into header-checked rows. Rows that are not valid UTF-8 or
/// that the CSV reader rejects become diagnostics.
pub(crate) fn read_rows(bytes: &[u8], header: &[&str]) -> Result<(Vec<Row>, Vec<Diagnostic>), IoError> {
    let expected = header.join(",");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = reader.byte_records();

    let first = match records.next() {
        None => return Err(IoError::MissingHeader { expected }),
        Some(Ok(r)) => r,
        Some(Err(e)) => return Err(IoError::Csv(e)),
    };
    let found: Vec<String> = first
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let s = String::from_utf8_lossy(f);
            let s = if i == 0 {
                s.trim_start_matches('\u{feff}').to_string()
            } else {
                s.into_owned()
            };
            s.trim().to_string()
        })
        .collect();
    if found.iter().map(String::as_str).ne(header.iter().copied()) {
        return Err(IoError::Header {
            expected,
            found: found.join(","),
        });
    }

    let mut rows = Vec::new();
    let mut diags = Vec::new();
    for rec in records {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                diags.push(Diagnostic::new(DiagnosticCode::Encoding, format!("unreadable row: {e}")).at_line(line));
                continue;
            }
        };
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec.get(0).is_some_and(|f| f.iter().all(u8::is_ascii_whitespace)) {
            continue;
        }
        let mut fields = Vec::with_capacity(rec.len());
        let mut bad_utf8 = false;
        for f in rec.iter() {
            match std::str::from_utf8(f) {
                Ok(s) => fields.push(s.trim().to_string()),
                Err(_) => {
                    bad_utf8 = true;
                    break;
                }
            }
        }
        if bad_utf8 {
            diags.push(Diagnostic::new(DiagnosticCode::Encoding, "row is not valid UTF-8").at_line(line));
            continue;
        }
        rows.push(Row { line, fields });
    }
    Ok((rows, diags))
}

/// Parses an optional real-valued field. Empty means absent.
pub(crate) fn opt_number(field: &str, name: &str, line: u64, diags: &mut Vec<Diagnostic>) -> Result<Option<f64>, ()> {
    if field.is_empty() {
        return Ok(None);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => {
            diags.push(
                Diagnostic::new(
                    DiagnosticCode::BadNumber,
                    format!("{name}: {field:?} is not a finite number"),
                )
                .at_line(line),
            );
            Err(())
        }
    }
}

pub(crate) fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(buf)
}
