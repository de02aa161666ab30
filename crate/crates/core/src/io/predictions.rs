use std::collections::HashSet;

use super::{csv_writer, opt_number, read_rows, IoError};
use crate::diagnostics::{Diagnostic, DiagnosticCode};
use crate::model::ActionClass;

pub const PREDICTION_HEADER: [&str; 4] = ["segment_id", "predicted_verb", "predicted_noun", "score"];

/// A classifier's output for one evaluated segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub segment_id: String,
    pub class: ActionClass,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedPredictions {
    pub predictions: Vec<Prediction>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parses a prediction file. Segment ids are not resolved here; unknown ids
/// are reported when the predictions are scored.
pub fn parse_predictions(bytes: &[u8]) -> Result<ParsedPredictions, IoError> {
    let (rows, mut diagnostics) = read_rows(bytes, &PREDICTION_HEADER)?;
    let mut predictions = Vec::with_capacity(rows.len());
    let mut seen = HashSet::new();
    for row in rows {
        let line = row.line;
        let f = &row.fields;
        if f.len() != 3 && f.len() != 4 {
            diagnostics.push(
                Diagnostic::new(
                    DiagnosticCode::ColumnCount,
                    format!("expected 3 or 4 columns, found {}", f.len()),
                )
                .at_line(line),
            );
            continue;
        }
        if f[0].is_empty() {
            diagnostics.push(Diagnostic::new(DiagnosticCode::MissingField, "segment_id is empty").at_line(line));
            continue;
        }
        let class = match ActionClass::new(&f[1], &f[2]) {
            Ok(c) => c,
            Err(e) => {
                diagnostics.push(Diagnostic::new(DiagnosticCode::InvalidClass, e.to_string()).at_line(line));
                continue;
            }
        };
        let score = match f.get(3) {
            None => None,
            Some(s) => match opt_number(s, "score", line, &mut diagnostics) {
                Ok(v) => v,
                Err(()) => continue,
            },
        };
        if !seen.insert(f[0].clone()) {
            diagnostics.push(
                Diagnostic::new(
                    DiagnosticCode::DuplicateId,
                    format!("segment_id {} predicted twice", f[0]),
                )
                .at_line(line),
            );
            continue;
        }
        predictions.push(Prediction {
            segment_id: f[0].clone(),
            class,
            score,
        });
    }
    Ok(ParsedPredictions {
        predictions,
        diagnostics,
    })
}

pub fn serialize_predictions(predictions: &[Prediction]) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(PREDICTION_HEADER).expect("write to memory");
        for p in predictions {
            let score = p.score.map(|s| format!("{s:.6}")).unwrap_or_default();
            w.write_record([p.segment_id.as_str(), p.class.verb(), p.class.noun(), &score])
                .expect("write to memory");
        }
        w.flush().expect("flush to memory");
    }
    buf
}
