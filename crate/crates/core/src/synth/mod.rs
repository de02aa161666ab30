//! Self-contained stand-in for a trained action classifier.
//!
//! Each synthetic video carries one action. Frames of the actional phase hold
//! the class prototype at full strength, pre-actional frames hold it at half
//! strength, and every frame gets Gaussian noise. A nearest-centroid
//! classifier over mean-pooled frames is then sensitive to boundaries the
//! same way a real model is: a query that misses action frames or includes
//! background dilutes the evidence.

mod classifier;
mod dataset;
mod pipeline;

pub use classifier::{classify, fit_centroids, fit_centroids_on, Centroids, IntervalSelector, Sampling};
pub use dataset::{generate_dataset, serialize_features, FeatureStream, SyntheticDataset, SyntheticInstance};
pub use pipeline::{run_benchmark, BenchmarkOutput, BenchmarkSettings};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error("feature_dim {feature_dim} < n_classes {n_classes}: orthogonal prototypes impossible")]
    Orthogonality { feature_dim: usize, n_classes: usize },
    #[error("no training example for class {0}")]
    EmptyClass(String),
    #[error("query {0} selects no frame of the stream")]
    QueryOutside(String),
    #[error(transparent)]
    Harness(#[from] crate::harness::HarnessError),
    #[error(transparent)]
    Perturb(#[from] crate::perturb::PerturbError),
}

/// Parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub feature_dim: usize,
    pub instances_per_class: usize,
    /// Length of every synthetic video, seconds.
    pub stream_length: f64,
    pub frame_rate: f64,
    /// `[min, max]` action duration, seconds.
    pub action_duration_range: (f64, f64),
    pub background_noise_sigma: f64,
    pub signal_strength: f64,
    /// Share of each action taken by its pre-actional phase.
    pub pre_actional_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_classes: 10,
            feature_dim: 16,
            instances_per_class: 60,
            stream_length: 20.0,
            frame_rate: 2.0,
            action_duration_range: (3.0, 8.0),
            background_noise_sigma: 0.75,
            signal_strength: 1.0,
            pre_actional_fraction: 0.25,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Spec(m.to_string()));
        let (lo, hi) = self.action_duration_range;
        if self.n_classes == 0 || self.feature_dim == 0 || self.instances_per_class == 0 {
            return bad("n_classes, feature_dim and instances_per_class must be positive");
        }
        if self.feature_dim < self.n_classes {
            return Err(SynthError::Orthogonality {
                feature_dim: self.feature_dim,
                n_classes: self.n_classes,
            });
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.stream_length) || !positive(self.frame_rate) || !positive(self.signal_strength) {
            return bad("stream_length, frame_rate and signal_strength must be positive");
        }
        if !(self.background_noise_sigma.is_finite() && self.background_noise_sigma >= 0.0) {
            return bad("background_noise_sigma must be non-negative");
        }
        if !(positive(lo) && lo <= hi && hi <= self.stream_length) {
            return bad("action_duration_range must satisfy 0 < min <= max <= stream_length");
        }
        if !(self.pre_actional_fraction > 0.0 && self.pre_actional_fraction < 1.0) {
            return bad("pre_actional_fraction must lie in (0, 1)");
        }
        if lo * self.pre_actional_fraction < 0.001 || lo * (1.0 - self.pre_actional_fraction) < 0.001 {
            return bad("both phases must last at least a millisecond");
        }
        Ok(())
    }
}
