use std::collections::BTreeMap;

use super::classifier::{classify, fit_centroids_on, Sampling};
use super::dataset::{SyntheticDataset, SyntheticInstance};
use super::SynthError;
use crate::diagnostics::Diagnostic;
use crate::harness::{augment, make_folds, score, training_pool, EvaluationReport, FoldSplit, SegmentRegistry};
use crate::io::Prediction;
use crate::model::VideoIndex;
use crate::perturb::{descriptor_bins, generate_all, GeneratedSegment, PerturbationConfig};

/// Everything `run_benchmark` needs besides the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSettings {
    pub perturbation: PerturbationConfig,
    pub k_folds: usize,
    pub fold_seed: u64,
    pub stratified: bool,
    /// Training set size multiplier; 1 trains on ground truth only.
    pub augmentation_factor: f64,
    pub augmentation_seed: u64,
    pub sampling: Sampling,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        Self {
            perturbation: PerturbationConfig::default(),
            k_folds: 5,
            fold_seed: 0,
            stratified: true,
            augmentation_factor: 1.0,
            augmentation_seed: 0,
            sampling: Sampling::AllFrames,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutput {
    pub generated: Vec<GeneratedSegment>,
    pub split: FoldSplit,
    /// Sorted by segment id.
    pub predictions: Vec<Prediction>,
    pub registry: SegmentRegistry,
    pub report: EvaluationReport,
    pub diagnostics: Vec<Diagnostic>,
}

/// Folds, generation, per-fold centroid fitting, classification of every
/// held-out ground-truth and generated segment, and scoring.
///
/// Each fold's classifier is trained on full ground-truth segments of the
/// other folds, plus sampled generated segments of those folds when the
/// augmentation factor exceeds 1.
pub fn run_benchmark(dataset: &SyntheticDataset, settings: &BenchmarkSettings) -> Result<BenchmarkOutput, SynthError> {
    let records = dataset.records();
    let videos = VideoIndex::new(dataset.videos()).expect("synthetic videos are valid");
    let (generated, mut diagnostics) = generate_all(&records, &settings.perturbation, &videos)?;
    let split = make_folds(&records, settings.k_folds, settings.fold_seed, settings.stratified)?;
    let by_id: BTreeMap<&str, &SyntheticInstance> = dataset
        .instances
        .iter()
        .map(|i| (i.record.annotation_id.as_str(), i))
        .collect();
    let gen_by_id: BTreeMap<&str, &GeneratedSegment> = generated.iter().map(|g| (g.segment_id.as_str(), g)).collect();

    let mut predictions = Vec::new();
    for fold in 0..split.k() {
        let train_ids = split.train_ids(fold);
        let mut examples: Vec<_> = train_ids
            .iter()
            .map(|id| {
                let inst = by_id[id.as_str()];
                (&inst.stream, inst.rb().full(), &inst.class)
            })
            .collect();
        if settings.augmentation_factor > 1.0 {
            let pool = training_pool(&split, fold, &generated);
            let seed = settings.augmentation_seed.wrapping_add(fold as u64);
            let aug = augment(&train_ids, &pool, settings.augmentation_factor, seed)?;
            for id in &aug.generated {
                let g = gen_by_id[id.as_str()];
                let inst = by_id[g.source_annotation_id.as_str()];
                examples.push((&inst.stream, g.interval, &inst.class));
            }
        }
        let centroids = fit_centroids_on(examples, &dataset.classes)?;

        let mut predict = |segment_id: &str, inst: &SyntheticInstance, q| -> Result<(), SynthError> {
            let class = classify(&inst.stream, &q, &centroids, settings.sampling)?;
            predictions.push(Prediction {
                segment_id: segment_id.to_string(),
                class: class.clone(),
                score: None,
            });
            Ok(())
        };
        for id in split.test_ids(fold) {
            let inst = by_id[id.as_str()];
            predict(&id, inst, inst.rb().full())?;
        }
        for g in &generated {
            if split.fold_of(&g.source_annotation_id) == Some(fold) {
                predict(&g.segment_id, by_id[g.source_annotation_id.as_str()], g.interval)?;
            }
        }
    }
    predictions.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));

    let bins = descriptor_bins(&settings.perturbation)?;
    let (registry, reg_diags) = SegmentRegistry::build(&records, &generated, Some(&split), bins);
    diagnostics.extend(reg_diags);
    let (report, score_diags) = score(&predictions, &registry, None);
    diagnostics.extend(score_diags);
    Ok(BenchmarkOutput {
        generated,
        split,
        predictions,
        registry,
        report,
        diagnostics,
    })
}
