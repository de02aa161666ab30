use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::model::{ActionClass, AnnotationRecord};

/// Assignment of ground-truth annotations to `k` cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    k: usize,
    assignments: BTreeMap<String, usize>,
}

impl FoldSplit {
    pub fn from_assignments(k: usize, assignments: BTreeMap<String, usize>) -> Self {
        Self { k, assignments }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// `(annotation_id, fold)` pairs in ascending id order.
    pub fn assignments(&self) -> impl Iterator<Item = (&String, usize)> {
        self.assignments.iter().map(|(id, f)| (id, *f))
    }

    pub fn fold_of(&self, annotation_id: &str) -> Option<usize> {
        self.assignments.get(annotation_id).copied()
    }

    pub fn test_ids(&self, fold: usize) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, f)| **f == fold)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn train_ids(&self, fold: usize) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, f)| **f != fold)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for f in self.assignments.values() {
            if *f < self.k {
                sizes[*f] += 1;
            }
        }
        sizes
    }
}

/// Splits records into `k` folds.
///
/// Ids are shuffled with a ChaCha8 stream seeded by `seed` and dealt
/// round-robin. In stratified mode each class is shuffled and dealt
/// separately, continuing the rotation where the previous class stopped, so
/// per-class fold sizes differ by at most one and small classes land in
/// distinct folds.
pub fn make_folds(
    records: &[AnnotationRecord],
    k: usize,
    seed: u64,
    stratified: bool,
) -> Result<FoldSplit, HarnessError> {
    if k < 2 {
        return Err(HarnessError::FoldCount(k));
    }
    let mut by_class: BTreeMap<&ActionClass, BTreeSet<&str>> = BTreeMap::new();
    let mut all = BTreeSet::new();
    for r in records {
        if !all.insert(r.annotation_id.as_str()) {
            return Err(HarnessError::DuplicateId(r.annotation_id.clone()));
        }
        by_class.entry(&r.class).or_default().insert(r.annotation_id.as_str());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<&str>> = if stratified {
        by_class.into_values().map(|ids| ids.into_iter().collect()).collect()
    } else {
        vec![all.into_iter().collect()]
    };

    let mut assignments = BTreeMap::new();
    let mut offset = 0;
    for mut ids in groups {
        ids.shuffle(&mut rng);
        for (i, id) in ids.iter().enumerate() {
            assignments.insert(id.to_string(), (offset + i) % k);
        }
        offset += ids.len();
    }
    Ok(FoldSplit { k, assignments })
}
