use std::collections::BTreeMap;

use super::{csv_writer, read_rows, IoError};
use crate::diagnostics::{Diagnostic, DiagnosticCode};
use crate::harness::FoldSplit;

pub const FOLD_HEADER: [&str; 2] = ["annotation_id", "fold"];

/// Writes one row per annotation in ascending id order.
pub fn serialize_folds(split: &FoldSplit) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(FOLD_HEADER).expect("write to memory");
        for (id, fold) in split.assignments() {
            w.write_record([id.as_str(), &fold.to_string()])
                .expect("write to memory");
        }
        w.flush().expect("flush to memory");
    }
    buf
}

/// Reads a fold file. `k` is one more than the largest fold index seen.
pub fn parse_folds(bytes: &[u8]) -> Result<(FoldSplit, Vec<Diagnostic>), IoError> {
    let (rows, mut diags) = read_rows(bytes, &FOLD_HEADER)?;
    let mut map = BTreeMap::new();
    for row in rows {
        let f = &row.fields;
        if f.len() != 2 || f[0].is_empty() {
            diags.push(Diagnostic::new(DiagnosticCode::ColumnCount, "expected annotation_id,fold").at_line(row.line));
            continue;
        }
        let Ok(fold) = f[1].parse::<usize>() else {
            diags.push(
                Diagnostic::new(DiagnosticCode::BadNumber, format!("fold {:?} is not an index", f[1]))
                    .at_line(row.line),
            );
            continue;
        };
        if map.insert(f[0].clone(), fold).is_some() {
            diags.push(
                Diagnostic::new(DiagnosticCode::DuplicateId, format!("{} assigned twice", f[0])).at_line(row.line),
            );
        }
    }
    let k = map.values().max().map_or(0, |m| m + 1);
    Ok((FoldSplit::from_assignments(k.max(2), map), diags))
}
