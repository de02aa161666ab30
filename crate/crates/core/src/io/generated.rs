use std::collections::HashSet;

use super::{csv_writer, opt_number, read_rows, IoError};
use crate::diagnostics::{Diagnostic, DiagnosticCode};
use crate::model::TimeInterval;
use crate::perturb::GeneratedSegment;

pub const GENERATED_HEADER: [&str; 8] = [
    "segment_id",
    "source_annotation_id",
    "start_sec",
    "end_sec",
    "iou",
    "start_shift",
    "end_shift",
    "length_diff",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedGenerated {
    pub segments: Vec<GeneratedSegment>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Writes segments in the given order. Times and shifts carry three decimals,
/// IoU six.
pub fn serialize_generated(segments: &[GeneratedSegment]) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(GENERATED_HEADER).expect("write to memory");
        for g in segments {
            w.write_record([
                g.segment_id.clone(),
                g.source_annotation_id.clone(),
                format!("{:.3}", g.interval.start()),
                format!("{:.3}", g.interval.end()),
                format!("{:.6}", g.iou_vs_gt),
                format!("{:.3}", g.start_shift),
                format!("{:.3}", g.end_shift),
                format!("{:.3}", g.length_diff),
            ])
            .expect("write to memory");
        }
        w.flush().expect("flush to memory");
    }
    buf
}

pub fn parse_generated(bytes: &[u8]) -> Result<ParsedGenerated, IoError> {
    let (rows, mut diagnostics) = read_rows(bytes, &GENERATED_HEADER)?;
    let mut segments = Vec::with_capacity(rows.len());
    let mut seen = HashSet::new();
    'rows: for row in rows {
        let (line, f) = (row.line, row.fields);
        if f.len() != GENERATED_HEADER.len() {
            diagnostics.push(
                Diagnostic::new(
                    DiagnosticCode::ColumnCount,
                    format!("expected {} columns, found {}", GENERATED_HEADER.len(), f.len()),
                )
                .at_line(line),
            );
            continue;
        }
        if f[0].is_empty() || f[1].is_empty() {
            diagnostics
                .push(Diagnostic::new(DiagnosticCode::MissingField, "segment or source id is empty").at_line(line));
            continue;
        }
        let mut nums = [0.0; 6];
        for (k, slot) in nums.iter_mut().enumerate() {
            match opt_number(&f[k + 2], GENERATED_HEADER[k + 2], line, &mut diagnostics) {
                Ok(Some(v)) => *slot = v,
                Ok(None) => {
                    diagnostics.push(
                        Diagnostic::new(
                            DiagnosticCode::MissingField,
                            format!("{} is empty", GENERATED_HEADER[k + 2]),
                        )
                        .at_line(line),
                    );
                    continue 'rows;
                }
                Err(()) => continue 'rows,
            }
        }
        let interval = match TimeInterval::new(nums[0], nums[1]) {
            Ok(iv) => iv,
            Err(e) => {
                diagnostics.push(Diagnostic::new(DiagnosticCode::InvalidInterval, e.to_string()).at_line(line));
                continue;
            }
        };
        if !seen.insert(f[0].clone()) {
            diagnostics.push(
                Diagnostic::new(
                    DiagnosticCode::DuplicateId,
                    format!("segment_id {} already defined", f[0]),
                )
                .at_line(line),
            );
            continue;
        }
        segments.push(GeneratedSegment {
            segment_id: f[0].clone(),
            source_annotation_id: f[1].clone(),
            interval,
            iou_vs_gt: nums[2],
            start_shift: nums[3],
            end_shift: nums[4],
            length_diff: nums[5],
        });
    }
    Ok(ParsedGenerated { segments, diagnostics })
}
