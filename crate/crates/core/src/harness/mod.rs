//! Cross-validation folds, training-set augmentation, and robustness scoring
//! of classifier predictions on ground-truth versus generated segments.
//!
//! Generated segments inherit the class and fold of the annotation they were
//! generated from, so a prediction on a generated segment is always made by
//! the model for which its source was held out.

mod augment;
mod folds;
mod report;
mod score;

pub use augment::{augment, AugmentedSet};
pub use folds::{make_folds, FoldSplit};
pub use report::{export_report, report_from_json, report_to_json, ReportSummary};
pub use score::{
    score, BinRow, BucketRow, ClassRow, ClassStatus, EvaluationReport, RegistryEntry, SegmentKind, SegmentRegistry,
    Tally, ThresholdRow,
};

use crate::perturb::GeneratedSegment;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("need at least 2 folds, got {0}")]
    FoldCount(usize),
    #[error("annotation id {0} appears more than once")]
    DuplicateId(String),
    #[error("augmentation factor must be >= 1, got {0}")]
    Factor(f64),
    #[error("pool segment {segment_id} comes from {source_annotation_id}, which is not in the training set")]
    Leakage {
        segment_id: String,
        source_annotation_id: String,
    },
    #[error("augmentation needs {required} generated segments but the pool has {available} (short by {})", required - available)]
    Shortfall { required: usize, available: usize },
}

/// Generated segments usable to augment the training set of `fold`: those
/// whose source annotation is not in the fold.
pub fn training_pool<'a>(
    split: &FoldSplit,
    fold: usize,
    generated: &'a [GeneratedSegment],
) -> Vec<&'a GeneratedSegment> {
    generated
        .iter()
        .filter(|g| split.fold_of(&g.source_annotation_id).is_some_and(|f| f != fold))
        .collect()
}
