use std::collections::HashSet;

use super::{csv_writer, opt_number, read_rows, IoError, Row};
use crate::diagnostics::{Diagnostic, DiagnosticCode};
use crate::model::{AnnotationRecord, Extent, RawInterval, RecordDraft, Schema};

pub const ANNOTATION_HEADER: [&str; 13] = [
    "annotation_id",
    "video_id",
    "verb",
    "noun",
    "annotator_id",
    "schema",
    "start_sec",
    "end_sec",
    "pre_start_sec",
    "pre_end_sec",
    "act_start_sec",
    "act_end_sec",
    "instance_key",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedAnnotations {
    pub records: Vec<AnnotationRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parses an annotation file. Fails only when the header is missing or
/// differs from [`ANNOTATION_HEADER`].
pub fn parse_annotations(bytes: &[u8]) -> Result<ParsedAnnotations, IoError> {
    let (rows, mut diagnostics) = read_rows(bytes, &ANNOTATION_HEADER)?;
    let mut records = Vec::with_capacity(rows.len());
    let mut seen = HashSet::new();
    for row in rows {
        let line = row.line;
        match parse_row(row) {
            Ok(rec) => {
                if !seen.insert(rec.annotation_id.clone()) {
                    diagnostics.push(
                        Diagnostic::new(
                            DiagnosticCode::DuplicateId,
                            format!("annotation_id {} already defined", rec.annotation_id),
                        )
                        .at_line(line),
                    );
                } else {
                    records.push(rec);
                }
            }
            Err(diags) => diagnostics.extend(diags.into_iter().map(|d| d.at_line(line))),
        }
    }
    Ok(ParsedAnnotations { records, diagnostics })
}

fn pair(
    f: &[String],
    a: usize,
    b: usize,
    what: &str,
    line: u64,
    diags: &mut Vec<Diagnostic>,
) -> Result<Option<RawInterval>, ()> {
    let start = opt_number(&f[a], ANNOTATION_HEADER[a], line, diags);
    let end = opt_number(&f[b], ANNOTATION_HEADER[b], line, diags);
    match (start?, end?) {
        (Some(start), Some(end)) => Ok(Some(RawInterval { start, end })),
        (None, None) => Ok(None),
        _ => {
            diags.push(
                Diagnostic::new(DiagnosticCode::MissingField, format!("{what} needs both start and end")).at_line(line),
            );
            Err(())
        }
    }
}

fn parse_row(row: Row) -> Result<AnnotationRecord, Vec<Diagnostic>> {
    let line = row.line;
    let f = row.fields;
    if f.len() != ANNOTATION_HEADER.len() {
        return Err(vec![Diagnostic::new(
            DiagnosticCode::ColumnCount,
            format!("expected {} columns, found {}", ANNOTATION_HEADER.len(), f.len()),
        )]);
    }
    let mut diags = Vec::new();
    let schema = match f[5].parse::<Schema>() {
        Ok(s) => Some(s),
        Err(e) => {
            diags.push(Diagnostic::new(DiagnosticCode::UnknownSchema, e.to_string()));
            None
        }
    };
    let interval = pair(&f, 6, 7, "start_sec/end_sec", line, &mut diags);
    let pre = pair(&f, 8, 9, "pre_start_sec/pre_end_sec", line, &mut diags);
    let act = pair(&f, 10, 11, "act_start_sec/act_end_sec", line, &mut diags);
    let (Some(schema), Ok(interval), Ok(pre_actional), Ok(actional)) = (schema, interval, pre, act) else {
        return Err(diags.into_iter().map(|d| Diagnostic { line: None, ..d }).collect());
    };
    RecordDraft {
        annotation_id: f[0].clone(),
        video_id: f[1].clone(),
        verb: f[2].clone(),
        noun: f[3].clone(),
        annotator_id: f[4].clone(),
        schema: Some(schema),
        interval,
        pre_actional,
        actional,
        instance_key: f[12].clone(),
    }
    .build()
}

fn t(x: f64) -> String {
    format!("{x:.3}")
}

/// Writes records in the given order. Times carry exactly three decimals;
/// Rubicon rows leave `start_sec`/`end_sec` empty.
pub fn serialize_annotations(records: &[AnnotationRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(ANNOTATION_HEADER).expect("write to memory");
        for r in records {
            let empty = String::new;
            let (start, end, ps, pe, as_, ae) = match &r.extent {
                Extent::Conventional(iv) => (t(iv.start()), t(iv.end()), empty(), empty(), empty(), empty()),
                Extent::Rubicon(rb) => (
                    empty(),
                    empty(),
                    t(rb.pre_actional().start()),
                    t(rb.pre_actional().end()),
                    t(rb.actional().start()),
                    t(rb.actional().end()),
                ),
            };
            w.write_record([
                r.annotation_id.as_str(),
                &r.video_id,
                r.class.verb(),
                r.class.noun(),
                &r.annotator_id,
                r.schema().as_str(),
                &start,
                &end,
                &ps,
                &pe,
                &as_,
                &ae,
                &r.instance_key,
            ])
            .expect("write to memory");
        }
        w.flush().expect("flush to memory");
    }
    buf
}
