use serde::{Deserialize, Serialize};

use super::score::{BinRow, ClassStatus, EvaluationReport};
use crate::io::IoError;

fn writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(buf)
}

fn table<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut w = writer(&mut buf);
        w.write_record(header).expect("write to memory");
        for r in rows {
            w.write_record(r).expect("write to memory");
        }
        w.flush().expect("flush to memory");
    }
    buf
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn opt6(x: Option<f64>) -> String {
    x.map(f6).unwrap_or_default()
}

fn bin_table(rows: &[BinRow]) -> Vec<u8> {
    table(
        ["bin_sec", "n", "correct", "accuracy"],
        rows.iter().map(|r| {
            [
                format!("{:.3}", r.bin),
                r.tally.n.to_string(),
                r.tally.correct.to_string(),
                f6(r.accuracy),
            ]
        }),
    )
}

/// Scalar part of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub n_gt: usize,
    pub n_generated: usize,
    pub overall_gt_accuracy: Option<f64>,
    pub overall_gen_accuracy: Option<f64>,
    pub fraction_classes_dropped: Option<f64>,
    pub classes_improved: usize,
    pub classes_dropped: usize,
    pub classes_unchanged: usize,
    pub unresolved_predictions: usize,
}

impl ReportSummary {
    pub fn of(report: &EvaluationReport) -> Self {
        Self {
            n_gt: report.gt.n,
            n_generated: report.generated.n,
            overall_gt_accuracy: report.overall_gt_accuracy,
            overall_gen_accuracy: report.overall_gen_accuracy,
            fraction_classes_dropped: report.fraction_classes_dropped,
            classes_improved: report.count_status(ClassStatus::Improved),
            classes_dropped: report.count_status(ClassStatus::Dropped),
            classes_unchanged: report.count_status(ClassStatus::Unchanged),
            unresolved_predictions: report.unresolved.len(),
        }
    }
}

/// Rounds to six decimals so exported JSON is stable and compact.
fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Named output files of a report: one CSV per table plus `summary.json`
/// (scalars) and `report.json` (the whole report).
pub fn export_report(report: &EvaluationReport) -> Vec<(&'static str, Vec<u8>)> {
    let cumulative = table(
        ["iou_above", "n", "correct", "accuracy"],
        report.accuracy_by_iou_cumulative.iter().map(|r| {
            [
                format!("{:.1}", r.threshold),
                r.tally.n.to_string(),
                r.tally.correct.to_string(),
                f6(r.accuracy),
            ]
        }),
    );
    let buckets = table(
        ["iou_lower", "iou_upper", "n", "correct", "accuracy"],
        report.accuracy_by_iou_bucket.iter().map(|r| {
            [
                format!("{:.1}", r.lower),
                format!("{:.1}", r.upper),
                r.tally.n.to_string(),
                r.tally.correct.to_string(),
                f6(r.accuracy),
            ]
        }),
    );
    let classes = table(
        [
            "class",
            "gt_n",
            "gt_accuracy",
            "gen_n",
            "gen_accuracy",
            "delta",
            "status",
        ],
        report.per_class.iter().map(|r| {
            [
                r.class.to_string(),
                r.gt.n.to_string(),
                opt6(r.gt.accuracy()),
                r.generated.n.to_string(),
                opt6(r.generated.accuracy()),
                opt6(r.delta),
                serde_json::to_value(r.status)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
            ]
        }),
    );
    let mut summary = ReportSummary::of(report);
    summary.overall_gt_accuracy = summary.overall_gt_accuracy.map(round6);
    summary.overall_gen_accuracy = summary.overall_gen_accuracy.map(round6);
    summary.fraction_classes_dropped = summary.fraction_classes_dropped.map(round6);
    let mut summary_json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    summary_json.push(b'\n');
    let mut full = report_to_json(report).into_bytes();
    full.push(b'\n');
    vec![
        ("iou_cumulative.csv", cumulative),
        ("iou_buckets.csv", buckets),
        ("start_shift.csv", bin_table(&report.accuracy_by_start_shift)),
        ("end_shift.csv", bin_table(&report.accuracy_by_end_shift)),
        ("length_diff.csv", bin_table(&report.accuracy_by_length_diff)),
        ("per_class.csv", classes),
        ("summary.json", summary_json),
        ("report.json", full),
    ]
}

pub fn report_to_json(report: &EvaluationReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn report_from_json(json: &str) -> Result<EvaluationReport, IoError> {
    Ok(serde_json::from_str(json)?)
}
