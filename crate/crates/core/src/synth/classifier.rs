use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{FeatureStream, SyntheticInstance};
use super::SynthError;
use crate::model::{ActionClass, TimeInterval};

/// Which part of a ground-truth label a training example covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalSelector {
    Full,
    PreActional,
    Actional,
}

impl IntervalSelector {
    pub fn select(&self, instance: &SyntheticInstance) -> TimeInterval {
        let rb = instance.rb();
        match self {
            IntervalSelector::Full => rb.full(),
            IntervalSelector::PreActional => rb.pre_actional(),
            IntervalSelector::Actional => rb.actional(),
        }
    }
}

/// How frames inside a query are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    AllFrames,
    /// `k` frames drawn uniformly without replacement, seeded; all frames
    /// when the query holds fewer than `k`.
    RandomK {
        k: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    pub classes: Vec<ActionClass>,
    pub vectors: Vec<Vec<f64>>,
}

impl Centroids {
    /// Class whose centroid is nearest in Euclidean distance; ties go to the
    /// earlier class.
    pub fn nearest(&self, x: &[f64]) -> &ActionClass {
        let mut best = (f64::INFINITY, 0);
        for (i, c) in self.vectors.iter().enumerate() {
            let d: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        &self.classes[best.1]
    }
}

/// Per-class mean of mean-pooled training examples.
pub fn fit_centroids_on<'a>(
    examples: impl IntoIterator<Item = (&'a FeatureStream, TimeInterval, &'a ActionClass)>,
    classes: &[ActionClass],
) -> Result<Centroids, SynthError> {
    let mut sums: Vec<Option<(Vec<f64>, usize)>> = vec![None; classes.len()];
    for (stream, interval, class) in examples {
        let Some(k) = classes.iter().position(|c| c == class) else {
            continue;
        };
        let range = stream.frame_range(&interval);
        if range.is_empty() {
            return Err(SynthError::QueryOutside(interval.to_string()));
        }
        let pooled = stream.mean_pool(range);
        let slot = sums[k].get_or_insert_with(|| (vec![0.0; pooled.len()], 0));
        slot.0.iter_mut().zip(&pooled).for_each(|(a, b)| *a += b);
        slot.1 += 1;
    }
    let vectors = sums
        .into_iter()
        .zip(classes)
        .map(|(s, c)| match s {
            Some((sum, n)) => Ok(sum.into_iter().map(|x| x / n as f64).collect()),
            None => Err(SynthError::EmptyClass(c.to_string())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Centroids {
        classes: classes.to_vec(),
        vectors,
    })
}

/// Fits one centroid per class from the `selector` interval of each instance.
pub fn fit_centroids(
    train: &[&SyntheticInstance],
    selector: IntervalSelector,
    classes: &[ActionClass],
) -> Result<Centroids, SynthError> {
    fit_centroids_on(train.iter().map(|i| (&i.stream, selector.select(i), &i.class)), classes)
}

/// Mean-pools the frames of `query` and returns the nearest class.
pub fn classify<'c>(
    stream: &FeatureStream,
    query: &TimeInterval,
    centroids: &'c Centroids,
    sampling: Sampling,
) -> Result<&'c ActionClass, SynthError> {
    let range = stream.frame_range(query);
    if range.is_empty() {
        return Err(SynthError::QueryOutside(query.to_string()));
    }
    let pooled = match sampling {
        Sampling::AllFrames => stream.mean_pool(range),
        Sampling::RandomK { k, seed } => {
            let len = range.end - range.start;
            if k >= len {
                stream.mean_pool(range)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut picked: Vec<usize> = index::sample(&mut rng, len, k.max(1))
                    .into_iter()
                    .map(|i| range.start + i)
                    .collect();
                picked.sort_unstable();
                stream.mean_of(&picked)
            }
        }
    };
    Ok(centroids.nearest(&pooled))
}
