//! Inter-annotator agreement on temporal bounds.
//!
//! For every interaction labeled by several annotators, the IoU of every
//! unordered pair of their intervals is computed. Pair lists are then
//! described per instance, pooled per class, and pooled across all classes.
//! Standard deviations use the population formula and quartiles use linear
//! interpolation between order statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Diagnostic, DiagnosticCode};
use crate::io::IoError;
use crate::model::{iou, ActionClass, AnnotationRecord, Extent, Schema, TimeInterval};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConsistencyError {
    #[error("instance not multiply annotated ({0} annotation)")]
    NotMultiplyAnnotated(usize),
    #[error("no statistics to export")]
    EmptyStats,
    #[error("unknown scheme {0:?}")]
    UnknownScheme(String),
}

/// Which interval of a record is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSelector {
    /// Start/end of conventional labels.
    Conventional,
    /// Concatenated pre-actional and actional phases of RB labels.
    RbFull,
    RbPre,
    RbAct,
}

impl SchemeSelector {
    pub const ALL: [SchemeSelector; 4] = [
        SchemeSelector::Conventional,
        SchemeSelector::RbFull,
        SchemeSelector::RbPre,
        SchemeSelector::RbAct,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeSelector::Conventional => "conventional",
            SchemeSelector::RbFull => "rb_full",
            SchemeSelector::RbPre => "rb_pre",
            SchemeSelector::RbAct => "rb_act",
        }
    }

    pub fn required_schema(&self) -> Schema {
        match self {
            SchemeSelector::Conventional => Schema::Conventional,
            _ => Schema::Rubicon,
        }
    }

    /// The interval this scheme compares, or `None` on a schema mismatch.
    pub fn select(&self, record: &AnnotationRecord) -> Option<TimeInterval> {
        match (self, &record.extent) {
            (SchemeSelector::Conventional, Extent::Conventional(iv)) => Some(*iv),
            (SchemeSelector::RbFull, Extent::Rubicon(rb)) => Some(rb.full()),
            (SchemeSelector::RbPre, Extent::Rubicon(rb)) => Some(rb.pre_actional()),
            (SchemeSelector::RbAct, Extent::Rubicon(rb)) => Some(rb.actional()),
            _ => None,
        }
    }
}

impl fmt::Display for SchemeSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeSelector {
    type Err = ConsistencyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeSelector::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ConsistencyError::UnknownScheme(s.to_string()))
    }
}

/// IoU of every unordered pair, in lexicographic pair order
/// `(0,1), (0,2), …, (1,2), …`.
pub fn pairwise_iou(intervals: &[TimeInterval]) -> Result<Vec<f64>, ConsistencyError> {
    if intervals.len() < 2 {
        return Err(ConsistencyError::NotMultiplyAnnotated(intervals.len()));
    }
    let mut out = Vec::with_capacity(intervals.len() * (intervals.len() - 1) / 2);
    for (i, a) in intervals.iter().enumerate() {
        for b in &intervals[i + 1..] {
            out.push(iou(a, b));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile `p` of ascending `sorted` by linear interpolation between the
/// order statistics at ranks `floor(p(n−1))` and `ceil(p(n−1))`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Population mean and standard deviation plus quartiles; `None` when empty.
pub fn describe(values: &[f64]) -> Option<(f64, f64, Quartiles)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = Quartiles {
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    };
    Some((mean, var.sqrt(), q))
}

/// Agreement statistics over a list of pair IoUs.
///
/// `class == None` pools every class; `instance_key == None` pools every
/// instance of the class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyStats {
    pub class: Option<ActionClass>,
    pub instance_key: Option<String>,
    pub scheme: SchemeSelector,
    pub pair_ious: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub quartiles: Quartiles,
}

impl ConsistencyStats {
    fn from_pairs(
        class: Option<ActionClass>,
        instance_key: Option<String>,
        scheme: SchemeSelector,
        pair_ious: Vec<f64>,
    ) -> Option<Self> {
        let (mean, std, quartiles) = describe(&pair_ious)?;
        Some(Self {
            class,
            instance_key,
            scheme,
            pair_ious,
            mean,
            std,
            quartiles,
        })
    }

    pub fn class_label(&self) -> String {
        self.class
            .as_ref()
            .map_or_else(|| POOLED_LABEL.to_string(), ToString::to_string)
    }
}

/// Class column value for statistics pooled over every class.
pub const POOLED_LABEL: &str = "ALL";

/// One compared pair, for export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairIou {
    pub class: ActionClass,
    pub instance_key: String,
    pub annotator_a: String,
    pub annotator_b: String,
    pub iou: f64,
}

/// What an annotator sees after submitting: agreement on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFeedback {
    pub instance_key: String,
    pub scheme: SchemeSelector,
    pub n_annotators: usize,
    pub annotators: Vec<String>,
    pub pair_ious: Vec<f64>,
    pub mean: Option<f64>,
    pub quartiles: Option<Quartiles>,
}

/// Agreement of all annotators of one instance under `scheme`.
///
/// `records` may contain any records; those of other instances or of the
/// wrong schema are ignored. Each annotator contributes their record with
/// the smallest annotation id.
pub fn instance_feedback(instance_key: &str, scheme: SchemeSelector, records: &[AnnotationRecord]) -> InstanceFeedback {
    let (chosen, _) = pick_annotators(records.iter().filter(|r| r.instance_key == instance_key), scheme);
    let annotators: Vec<String> = chosen.iter().map(|(a, _)| a.annotator_id.clone()).collect();
    let intervals: Vec<TimeInterval> = chosen.iter().map(|(_, iv)| *iv).collect();
    let pair_ious = pairwise_iou(&intervals).unwrap_or_default();
    let described = describe(&pair_ious);
    InstanceFeedback {
        instance_key: instance_key.to_string(),
        scheme,
        n_annotators: annotators.len(),
        annotators,
        pair_ious,
        mean: described.map(|d| d.0),
        quartiles: described.map(|d| d.2),
    }
}

type Picked<'a> = Vec<(&'a AnnotationRecord, TimeInterval)>;

/// One record per annotator, ordered by annotator id, plus the records
/// dropped as repeats.
fn pick_annotators<'a>(
    records: impl Iterator<Item = &'a AnnotationRecord>,
    scheme: SchemeSelector,
) -> (Picked<'a>, Vec<&'a AnnotationRecord>) {
    let mut matching: Vec<(&AnnotationRecord, TimeInterval)> =
        records.filter_map(|r| scheme.select(r).map(|iv| (r, iv))).collect();
    matching.sort_by(|a, b| {
        (a.0.annotator_id.as_str(), a.0.annotation_id.as_str())
            .cmp(&(b.0.annotator_id.as_str(), b.0.annotation_id.as_str()))
    });
    let mut chosen: Picked<'a> = Vec::new();
    let mut repeats = Vec::new();
    for (r, iv) in matching {
        if chosen.last().is_some_and(|(c, _)| c.annotator_id == r.annotator_id) {
            repeats.push(r);
        } else {
            chosen.push((r, iv));
        }
    }
    (chosen, repeats)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConsistencyReport {
    /// Per (class, instance), ordered by class then instance key.
    pub instances: Vec<ConsistencyStats>,
    /// Per class, all pairs of all its instances.
    pub classes: Vec<ConsistencyStats>,
    /// All pairs of every class.
    pub pooled: Option<ConsistencyStats>,
    pub pairs: Vec<PairIou>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ConsistencyReport {
    /// Class aggregates followed by the pooled row, the rows of a box plot.
    pub fn aggregates(&self) -> Vec<ConsistencyStats> {
        self.classes.iter().cloned().chain(self.pooled.clone()).collect()
    }
}

/// Agreement statistics for every multiply-annotated instance in `records`.
pub fn summarize(scheme: SchemeSelector, records: &[AnnotationRecord]) -> ConsistencyReport {
    let mut by_instance: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records {
        by_instance.entry(r.instance_key.as_str()).or_default().push(r);
    }

    let mut report = ConsistencyReport::default();
    let mut per_class: BTreeMap<ActionClass, Vec<(String, Vec<f64>)>> = BTreeMap::new();
    let mut class_pairs: BTreeMap<ActionClass, Vec<PairIou>> = BTreeMap::new();

    for (key, group) in by_instance {
        let (chosen, repeats) = pick_annotators(group.iter().copied(), scheme);
        for r in repeats {
            report.diagnostics.push(Diagnostic::new(
                DiagnosticCode::DuplicateAnnotator,
                format!(
                    "instance {key}: annotator {} labeled it more than once, {} ignored",
                    r.annotator_id, r.annotation_id
                ),
            ));
        }
        if chosen.is_empty() {
            report.diagnostics.push(Diagnostic::new(
                DiagnosticCode::SchemaMismatch,
                format!(
                    "instance {key}: no {} records for scheme {scheme}",
                    scheme.required_schema()
                ),
            ));
            continue;
        }
        if chosen.len() < 2 {
            report.diagnostics.push(Diagnostic::new(
                DiagnosticCode::NotMultiplyAnnotated,
                format!("instance {key}: only one {} annotation", scheme.required_schema()),
            ));
            continue;
        }
        let class = chosen[0].0.class.clone();
        if chosen.iter().any(|(r, _)| r.class != class) {
            report.diagnostics.push(Diagnostic::new(
                DiagnosticCode::ClassMismatch,
                format!("instance {key}: annotators disagree on the class, using {class}"),
            ));
        }
        let intervals: Vec<TimeInterval> = chosen.iter().map(|(_, iv)| *iv).collect();
        let ious = pairwise_iou(&intervals).expect("at least two intervals");
        let mut k = 0;
        for i in 0..chosen.len() {
            for j in i + 1..chosen.len() {
                class_pairs.entry(class.clone()).or_default().push(PairIou {
                    class: class.clone(),
                    instance_key: key.to_string(),
                    annotator_a: chosen[i].0.annotator_id.clone(),
                    annotator_b: chosen[j].0.annotator_id.clone(),
                    iou: ious[k],
                });
                k += 1;
            }
        }
        per_class.entry(class).or_default().push((key.to_string(), ious));
    }

    let mut all = Vec::new();
    for (class, instances) in per_class {
        let mut class_all = Vec::new();
        for (key, ious) in instances {
            class_all.extend_from_slice(&ious);
            report.instances.extend(ConsistencyStats::from_pairs(
                Some(class.clone()),
                Some(key),
                scheme,
                ious,
            ));
        }
        all.extend_from_slice(&class_all);
        report
            .classes
            .extend(ConsistencyStats::from_pairs(Some(class), None, scheme, class_all));
    }
    report.pooled = ConsistencyStats::from_pairs(None, None, scheme, all);
    report.pairs = class_pairs.into_values().flatten().collect();
    report
}

fn writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(buf)
}

pub const BOXPLOT_HEADER: [&str; 8] = ["class", "scheme", "min", "q1", "median", "q3", "max", "n_pairs"];

/// Box-plot table, one row per statistics entry, sorted by class then scheme.
pub fn export_boxplot_data(stats: &[ConsistencyStats]) -> Result<Vec<u8>, ConsistencyError> {
    if stats.is_empty() {
        return Err(ConsistencyError::EmptyStats);
    }
    let mut rows: Vec<&ConsistencyStats> = stats.iter().collect();
    rows.sort_by_key(|r| (r.class_label(), r.scheme));
    let mut buf = Vec::new();
    {
        let mut w = writer(&mut buf);
        w.write_record(BOXPLOT_HEADER)
            .map_err(|_| ConsistencyError::EmptyStats)?;
        for s in rows {
            let q = &s.quartiles;
            w.write_record([
                s.class_label(),
                s.scheme.to_string(),
                format!("{:.6}", q.min),
                format!("{:.6}", q.q1),
                format!("{:.6}", q.median),
                format!("{:.6}", q.q3),
                format!("{:.6}", q.max),
                s.pair_ious.len().to_string(),
            ])
            .expect("write to memory");
        }
        w.flush().expect("flush to memory");
    }
    Ok(buf)
}

pub const PAIRS_HEADER: [&str; 6] = ["class", "instance_key", "scheme", "annotator_a", "annotator_b", "iou"];

/// Every compared pair. IoUs are written in shortest round-trip form so
/// pooled statistics can be recomputed exactly from the file.
pub fn export_pairs(scheme: SchemeSelector, pairs: &[PairIou]) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut w = writer(&mut buf);
        w.write_record(PAIRS_HEADER).expect("write to memory");
        for p in pairs {
            w.write_record([
                p.class.to_string(),
                p.instance_key.clone(),
                scheme.to_string(),
                p.annotator_a.clone(),
                p.annotator_b.clone(),
                format!("{:?}", p.iou),
            ])
            .expect("write to memory");
        }
        w.flush().expect("flush to memory");
    }
    buf
}

/// Reads back the IoU column of a pairs file written by [`export_pairs`].
pub fn parse_pair_ious(bytes: &[u8]) -> Result<Vec<f64>, IoError> {
    let (rows, diags) = crate::io::read_rows(bytes, &PAIRS_HEADER)?;
    if let Some(d) = diags.first() {
        return Err(IoError::Config(d.to_string()));
    }
    rows.iter()
        .map(|r| {
            r.fields
                .get(5)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| IoError::Config(format!("line {}: bad iou", r.line)))
        })
        .collect()
}

pub const INSTANCES_HEADER: [&str; 6] = ["class", "instance_key", "scheme", "n_pairs", "mean", "std"];

pub fn export_instances(stats: &[ConsistencyStats]) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut w = writer(&mut buf);
        w.write_record(INSTANCES_HEADER).expect("write to memory");
        for s in stats {
            w.write_record([
                s.class_label(),
                s.instance_key.clone().unwrap_or_default(),
                s.scheme.to_string(),
                s.pair_ious.len().to_string(),
                format!("{:.6}", s.mean),
                format!("{:.6}", s.std),
            ])
            .expect("write to memory");
        }
        w.flush().expect("flush to memory");
    }
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RawInterval, RbAnnotation, RecordDraft};

    fn iv(s: f64, e: f64) -> TimeInterval {
        TimeInterval::new(s, e).unwrap()
    }

    fn conv(id: &str, ann: &str, key: &str, s: f64, e: f64) -> AnnotationRecord {
        RecordDraft {
            annotation_id: id.into(),
            video_id: "v".into(),
            verb: "open".into(),
            noun: "door".into(),
            annotator_id: ann.into(),
            instance_key: key.into(),
            schema: Some(Schema::Conventional),
            interval: Some(RawInterval { start: s, end: e }),
            ..Default::default()
        }
        .build()
        .unwrap()
    }

    fn rb(id: &str, ann: &str, key: &str, marks: (f64, f64, f64)) -> AnnotationRecord {
        AnnotationRecord {
            extent: Extent::Rubicon(RbAnnotation::from_marks(marks.0, marks.1, marks.2).unwrap()),
            ..conv(id, ann, key, 0.0, 1.0)
        }
    }

    #[test]
    fn pairwise_examples() {
        assert_eq!(pairwise_iou(&[iv(0.0, 10.0), iv(0.0, 10.0)]).unwrap(), vec![1.0]);
        let three = pairwise_iou(&[iv(0.0, 10.0), iv(0.0, 10.0), iv(5.0, 15.0)]).unwrap();
        assert_eq!(three[0], 1.0);
        assert!((three[1] - 1.0 / 3.0).abs() < 1e-12 && (three[2] - 1.0 / 3.0).abs() < 1e-12);
        let (mean, _, _) = describe(&three).unwrap();
        assert!((mean - 5.0 / 9.0).abs() < 1e-9);
        assert_eq!(pairwise_iou(&[iv(0.0, 10.0), iv(20.0, 30.0)]).unwrap(), vec![0.0]);
        assert_eq!(
            pairwise_iou(&[iv(0.0, 10.0)]).unwrap_err().to_string(),
            "instance not multiply annotated (1 annotation)"
        );
    }

    #[test]
    fn quartiles_interpolate_linearly() {
        let (_, _, q) = describe(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (0.25, 0.5, 0.75));
        let (mean, std, q) = describe(&[1.0]).unwrap();
        assert_eq!((mean, std), (1.0, 0.0));
        assert_eq!([q.min, q.q1, q.median, q.q3, q.max], [1.0; 5]);
        let (_, std, _) = describe(&[0.0, 1.0]).unwrap();
        assert_eq!(std, 0.5);
    }

    #[test]
    fn identical_rb_phases_agree_fully() {
        let recs = [rb("a", "x", "i", (0.0, 5.0, 10.0)), rb("b", "y", "i", (0.0, 5.0, 10.0))];
        for scheme in [SchemeSelector::RbPre, SchemeSelector::RbAct, SchemeSelector::RbFull] {
            let rep = summarize(scheme, &recs);
            assert_eq!(rep.pooled.unwrap().mean, 1.0);
        }
    }

    #[test]
    fn summarize_groups_and_pools() {
        let recs = vec![
            conv("a1", "ann1", "i1", 0.0, 10.0),
            conv("a2", "ann2", "i1", 0.0, 10.0),
            conv("a3", "ann3", "i1", 5.0, 15.0),
            conv("b1", "ann1", "i2", 0.0, 2.0),
            conv("b2", "ann2", "i2", 1.0, 2.0),
            conv("c1", "ann1", "i3", 0.0, 2.0),
        ];
        let rep = summarize(SchemeSelector::Conventional, &recs);
        assert_eq!(rep.instances.len(), 2);
        assert_eq!(rep.classes.len(), 1);
        let pooled = rep.pooled.as_ref().unwrap();
        assert_eq!(pooled.pair_ious.len(), 4);
        assert_eq!(rep.pairs.len(), 4);
        assert_eq!(rep.pairs[1].annotator_b, "ann3");
        let expected = (1.0 + 1.0 / 3.0 + 1.0 / 3.0 + 0.5) / 4.0;
        assert!((pooled.mean - expected).abs() < 1e-12);
        assert_eq!(rep.diagnostics.len(), 1);
        assert_eq!(rep.diagnostics[0].code, DiagnosticCode::NotMultiplyAnnotated);
    }

    #[test]
    fn schema_mismatch_skips_instance() {
        let recs = vec![conv("a1", "ann1", "i1", 0.0, 10.0), conv("a2", "ann2", "i1", 0.0, 10.0)];
        let rep = summarize(SchemeSelector::RbFull, &recs);
        assert!(rep.instances.is_empty() && rep.pooled.is_none());
        assert_eq!(rep.diagnostics[0].code, DiagnosticCode::SchemaMismatch);
    }

    #[test]
    fn repeated_annotator_counted_once() {
        let recs = vec![
            conv("a1", "ann1", "i1", 0.0, 10.0),
            conv("a2", "ann1", "i1", 5.0, 10.0),
            conv("a3", "ann2", "i1", 0.0, 10.0),
        ];
        let rep = summarize(SchemeSelector::Conventional, &recs);
        assert_eq!(rep.instances[0].pair_ious, vec![1.0]);
        assert_eq!(rep.diagnostics[0].code, DiagnosticCode::DuplicateAnnotator);
    }

    #[test]
    fn feedback_for_first_annotator() {
        let recs = vec![conv("a1", "ann1", "i1", 0.0, 10.0)];
        let fb = instance_feedback("i1", SchemeSelector::Conventional, &recs);
        assert_eq!(fb.n_annotators, 1);
        assert!(fb.pair_ious.is_empty() && fb.mean.is_none());
    }

    #[test]
    fn boxplot_export() {
        let recs = vec![conv("a1", "ann1", "i1", 0.0, 10.0), conv("a2", "ann2", "i1", 0.0, 10.0)];
        let rep = summarize(SchemeSelector::Conventional, &recs);
        let text = String::from_utf8(export_boxplot_data(&rep.aggregates()).unwrap()).unwrap();
        assert_eq!(
            text,
            "class,scheme,min,q1,median,q3,max,n_pairs\n\
             ALL,conventional,1.000000,1.000000,1.000000,1.000000,1.000000,1\n\
             open door,conventional,1.000000,1.000000,1.000000,1.000000,1.000000,1\n"
        );
        assert_eq!(export_boxplot_data(&[]).unwrap_err(), ConsistencyError::EmptyStats);
    }

    #[test]
    fn pairs_export_round_trips_exactly() {
        let recs = vec![
            conv("a1", "ann1", "i1", 0.0, 10.0),
            conv("a2", "ann2", "i1", 0.0, 10.0),
            conv("a3", "ann3", "i1", 5.0, 15.0),
        ];
        let rep = summarize(SchemeSelector::Conventional, &recs);
        let back = parse_pair_ious(&export_pairs(SchemeSelector::Conventional, &rep.pairs)).unwrap();
        assert_eq!(back, rep.pooled.unwrap().pair_ious);
    }
}
