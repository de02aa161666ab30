use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::perturb::GeneratedSegment;

/// A training set enlarged with generated segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedSet {
    /// Ground-truth annotation ids, as given.
    pub ground_truth: Vec<String>,
    /// Sampled generated segment ids, in ascending id order.
    pub generated: Vec<String>,
}

impl AugmentedSet {
    pub fn len(&self) -> usize {
        self.ground_truth.len() + self.generated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Adds `round((factor − 1) · |train|)` generated segments drawn uniformly
/// without replacement from `pool`.
///
/// Every pool segment must come from an annotation in `train_ids`; anything
/// else would leak test data into training and is rejected.
pub fn augment(
    train_ids: &[String],
    pool: &[&GeneratedSegment],
    factor: f64,
    seed: u64,
) -> Result<AugmentedSet, HarnessError> {
    if !(factor.is_finite() && factor >= 1.0) {
        return Err(HarnessError::Factor(factor));
    }
    let train: BTreeSet<&str> = train_ids.iter().map(String::as_str).collect();
    if let Some(bad) = pool.iter().find(|g| !train.contains(g.source_annotation_id.as_str())) {
        return Err(HarnessError::Leakage {
            segment_id: bad.segment_id.clone(),
            source_annotation_id: bad.source_annotation_id.clone(),
        });
    }
    let required = ((factor - 1.0) * train_ids.len() as f64).round() as usize;
    if pool.len() < required {
        return Err(HarnessError::Shortfall {
            required,
            available: pool.len(),
        });
    }
    let mut sorted: Vec<&str> = pool.iter().map(|g| g.segment_id.as_str()).collect();
    sorted.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, sorted.len(), required).into_vec();
    picked.sort_unstable();
    Ok(AugmentedSet {
        ground_truth: train_ids.to_vec(),
        generated: picked.into_iter().map(|i| sorted[i].to_string()).collect(),
    })
}
