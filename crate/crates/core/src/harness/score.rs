use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FoldSplit;
use crate::diagnostics::{Diagnostic, DiagnosticCode};
use crate::io::Prediction;
use crate::model::{from_ms, ActionClass, AnnotationRecord};
use crate::perturb::{DescriptorBins, GeneratedSegment};

/// What the registry knows about one evaluable segment.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentKind {
    GroundTruth,
    Generated {
        source_annotation_id: String,
        iou: f64,
        start_shift: f64,
        end_shift: f64,
        length_diff: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryEntry {
    pub class: ActionClass,
    /// Fold of the ground truth, or of the generating annotation.
    pub fold: Option<usize>,
    pub kind: SegmentKind,
}

/// Every ground-truth and generated segment predictions may refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRegistry {
    entries: BTreeMap<String, RegistryEntry>,
    bins: DescriptorBins,
}

impl SegmentRegistry {
    /// Ground-truth segments are keyed by annotation id. Generated segments
    /// inherit class and fold from their source annotation; those whose
    /// source is unknown are reported and left out.
    pub fn build(
        records: &[AnnotationRecord],
        generated: &[GeneratedSegment],
        folds: Option<&FoldSplit>,
        bins: DescriptorBins,
    ) -> (Self, Vec<Diagnostic>) {
        let fold_of = |id: &str| folds.and_then(|f| f.fold_of(id));
        let mut entries = BTreeMap::new();
        let mut diags = Vec::new();
        for r in records {
            entries.insert(
                r.annotation_id.clone(),
                RegistryEntry {
                    class: r.class.clone(),
                    fold: fold_of(&r.annotation_id),
                    kind: SegmentKind::GroundTruth,
                },
            );
        }
        for g in generated {
            let Some(source) = entries
                .get(&g.source_annotation_id)
                .filter(|e| e.kind == SegmentKind::GroundTruth)
            else {
                diags.push(Diagnostic::new(
                    DiagnosticCode::UnknownSegment,
                    format!(
                        "generated segment {} has unknown source {}",
                        g.segment_id, g.source_annotation_id
                    ),
                ));
                continue;
            };
            if entries.contains_key(&g.segment_id) {
                diags.push(Diagnostic::new(
                    DiagnosticCode::DuplicateId,
                    format!("segment id {} defined twice", g.segment_id),
                ));
                continue;
            }
            let entry = RegistryEntry {
                class: source.class.clone(),
                fold: source.fold,
                kind: SegmentKind::Generated {
                    source_annotation_id: g.source_annotation_id.clone(),
                    iou: g.iou_vs_gt,
                    start_shift: g.start_shift,
                    end_shift: g.end_shift,
                    length_diff: g.length_diff,
                },
            };
            entries.insert(g.segment_id.clone(), entry);
        }
        (Self { entries, bins }, diags)
    }

    pub fn get(&self, segment_id: &str) -> Option<&RegistryEntry> {
        self.entries.get(segment_id)
    }

    pub fn contains(&self, segment_id: &str) -> bool {
        self.entries.contains_key(segment_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &RegistryEntry)> {
        self.entries.iter()
    }

    pub fn bins(&self) -> &DescriptorBins {
        &self.bins
    }
}

/// Correct/total counts for one cell of a table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub n: usize,
    pub correct: usize,
}

impl Tally {
    pub fn add(&mut self, correct: bool) {
        self.n += 1;
        self.correct += usize::from(correct);
    }

    pub fn merge(&mut self, other: Tally) {
        self.n += other.n;
        self.correct += other.correct;
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.n > 0).then(|| self.correct as f64 / self.n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    /// Segments with `IoU > threshold`.
    pub threshold: f64,
    pub tally: Tally,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub lower: f64,
    pub upper: f64,
    pub tally: Tally,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    /// Bin centre in seconds.
    pub bin: f64,
    pub tally: Tally,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassStatus {
    Improved,
    Dropped,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: ActionClass,
    pub gt: Tally,
    pub generated: Tally,
    /// Generated-segment accuracy minus ground-truth accuracy. Absent when the
    /// class lacks predictions of either kind.
    pub delta: Option<f64>,
    pub status: ClassStatus,
}

/// Accuracy of a classifier on ground-truth segments and on generated
/// segments, broken down by how the generated boundaries differ.
///
/// Table rows exist only for bins holding at least one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub gt: Tally,
    pub generated: Tally,
    pub overall_gt_accuracy: Option<f64>,
    pub overall_gen_accuracy: Option<f64>,
    pub accuracy_by_iou_cumulative: Vec<ThresholdRow>,
    pub accuracy_by_iou_bucket: Vec<BucketRow>,
    pub accuracy_by_start_shift: Vec<BinRow>,
    pub accuracy_by_end_shift: Vec<BinRow>,
    pub accuracy_by_length_diff: Vec<BinRow>,
    pub per_class: Vec<ClassRow>,
    /// Share of classes with both kinds of predictions whose delta is negative.
    pub fraction_classes_dropped: Option<f64>,
    pub unresolved: Vec<String>,
}

impl EvaluationReport {
    pub fn per_class_delta(&self, class: &ActionClass) -> Option<f64> {
        self.per_class.iter().find(|r| &r.class == class).and_then(|r| r.delta)
    }

    pub fn count_status(&self, status: ClassStatus) -> usize {
        self.per_class.iter().filter(|r| r.status == status).count()
    }

    /// Pooled accuracy over the disjoint IoU buckets overlapping `(lower, upper]`.
    pub fn pooled_bucket_accuracy(&self, lower: f64, upper: f64) -> Option<f64> {
        let mut t = Tally::default();
        for row in &self.accuracy_by_iou_bucket {
            if row.lower >= lower - 1e-9 && row.upper <= upper + 1e-9 {
                t.merge(row.tally);
            }
        }
        t.accuracy()
    }

    /// Checks that every cumulative row equals the merge of the disjoint
    /// buckets above its threshold.
    pub fn check_binning_consistency(&self) -> Result<(), String> {
        for row in &self.accuracy_by_iou_cumulative {
            let mut sum = Tally::default();
            for b in &self.accuracy_by_iou_bucket {
                if b.lower >= row.threshold - 1e-9 {
                    sum.merge(b.tally);
                }
            }
            if sum != row.tally {
                return Err(format!(
                    "IoU > {}: cumulative {:?} but buckets sum to {:?}",
                    row.threshold, row.tally, sum
                ));
            }
            let weighted: f64 = self
                .accuracy_by_iou_bucket
                .iter()
                .filter(|b| b.lower >= row.threshold - 1e-9)
                .map(|b| b.accuracy * b.tally.n as f64)
                .sum::<f64>()
                / sum.n as f64;
            if (weighted - row.accuracy).abs() > 1e-12 {
                return Err(format!(
                    "IoU > {}: weighted bucket accuracy {weighted} != {}",
                    row.threshold, row.accuracy
                ));
            }
        }
        Ok(())
    }
}

fn rows<T>(map: BTreeMap<i64, Tally>, make: impl Fn(f64, Tally, f64) -> T) -> Vec<T> {
    map.into_iter()
        .filter_map(|(k, t)| t.accuracy().map(|a| make(from_ms(k), t, a)))
        .collect()
}

/// Scores predictions against the registry. When `fold` is given, only
/// segments of that fold count. Unknown segment ids are listed in
/// `unresolved` and reported as diagnostics.
pub fn score(
    predictions: &[Prediction],
    registry: &SegmentRegistry,
    fold: Option<usize>,
) -> (EvaluationReport, Vec<Diagnostic>) {
    let bins = registry.bins();
    let mut diags = Vec::new();
    let mut unresolved = Vec::new();
    let mut gt = Tally::default();
    let mut generated = Tally::default();
    let mut cumulative = vec![Tally::default(); bins.iou_thresholds.len()];
    let mut buckets = vec![Tally::default(); bins.iou_buckets.len()];
    let mut start_bins: BTreeMap<i64, Tally> = BTreeMap::new();
    let mut end_bins: BTreeMap<i64, Tally> = BTreeMap::new();
    let mut length_bins: BTreeMap<i64, Tally> = BTreeMap::new();
    let mut per_class: BTreeMap<ActionClass, (Tally, Tally)> = BTreeMap::new();

    for p in predictions {
        let Some(entry) = registry.get(&p.segment_id) else {
            diags.push(Diagnostic::new(
                DiagnosticCode::UnknownSegment,
                format!("prediction for unknown segment {}", p.segment_id),
            ));
            unresolved.push(p.segment_id.clone());
            continue;
        };
        if fold.is_some() && entry.fold != fold {
            continue;
        }
        let ok = p.class == entry.class;
        let class_tally = per_class.entry(entry.class.clone()).or_default();
        match &entry.kind {
            SegmentKind::GroundTruth => {
                gt.add(ok);
                class_tally.0.add(ok);
            }
            SegmentKind::Generated {
                iou,
                start_shift,
                end_shift,
                length_diff,
                ..
            } => {
                generated.add(ok);
                class_tally.1.add(ok);
                for (t, tally) in bins.iou_thresholds.iter().zip(cumulative.iter_mut()) {
                    if DescriptorBins::above_threshold(*iou, *t) {
                        tally.add(ok);
                    }
                }
                if let Some(b) = bins.iou_bucket(*iou) {
                    buckets[b].add(ok);
                }
                if let Some(b) = bins.shift_bin(*start_shift) {
                    start_bins.entry(b).or_default().add(ok);
                }
                if let Some(b) = bins.shift_bin(*end_shift) {
                    end_bins.entry(b).or_default().add(ok);
                }
                if let Some(b) = bins.length_bin(*length_diff) {
                    length_bins.entry(b).or_default().add(ok);
                }
            }
        }
    }

    let per_class: Vec<ClassRow> = per_class
        .into_iter()
        .map(|(class, (g, gen))| {
            let delta = match (gen.accuracy(), g.accuracy()) {
                (Some(a), Some(b)) => Some(a - b),
                _ => None,
            };
            let status = match delta {
                Some(d) if d < 0.0 => ClassStatus::Dropped,
                Some(d) if d > 0.0 => ClassStatus::Improved,
                _ => ClassStatus::Unchanged,
            };
            ClassRow {
                class,
                gt: g,
                generated: gen,
                delta,
                status,
            }
        })
        .collect();
    let with_delta = per_class.iter().filter(|r| r.delta.is_some()).count();
    let dropped = per_class.iter().filter(|r| r.status == ClassStatus::Dropped).count();

    let report = EvaluationReport {
        gt,
        generated,
        overall_gt_accuracy: gt.accuracy(),
        overall_gen_accuracy: generated.accuracy(),
        accuracy_by_iou_cumulative: bins
            .iou_thresholds
            .iter()
            .zip(cumulative)
            .filter_map(|(t, tally)| {
                tally.accuracy().map(|accuracy| ThresholdRow {
                    threshold: *t,
                    tally,
                    accuracy,
                })
            })
            .collect(),
        accuracy_by_iou_bucket: bins
            .iou_buckets
            .iter()
            .zip(buckets)
            .filter_map(|(&(lower, upper), tally)| {
                tally.accuracy().map(|accuracy| BucketRow {
                    lower,
                    upper,
                    tally,
                    accuracy,
                })
            })
            .collect(),
        accuracy_by_start_shift: rows(start_bins, |bin, tally, accuracy| BinRow { bin, tally, accuracy }),
        accuracy_by_end_shift: rows(end_bins, |bin, tally, accuracy| BinRow { bin, tally, accuracy }),
        accuracy_by_length_diff: rows(length_bins, |bin, tally, accuracy| BinRow { bin, tally, accuracy }),
        per_class,
        fraction_classes_dropped: (with_delta > 0).then(|| dropped as f64 / with_delta as f64),
        unresolved,
    };
    (report, diags)
}
