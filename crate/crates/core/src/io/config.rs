use serde::{Deserialize, Serialize};

use super::IoError;
use crate::perturb::PerturbationConfig;
use crate::synth::SyntheticSpec;

/// Project-wide settings, stored as JSON. Every section is optional and
/// falls back to its defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub perturbation: PerturbationSection,
    pub folds: FoldConfig,
    pub augmentation: AugmentationConfig,
    pub control_questions: Vec<ControlQuestion>,
    /// Failed gate attempts allowed after the first one.
    pub gate_max_retries: u32,
    pub synthetic: SyntheticSpec,
    pub service: ServiceConfig,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            perturbation: PerturbationSection::default(),
            folds: FoldConfig::default(),
            augmentation: AugmentationConfig::default(),
            control_questions: Vec::new(),
            gate_max_retries: 2,
            synthetic: SyntheticSpec::default(),
            service: ServiceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSection {
    pub delta_cap: f64,
    pub step: f64,
    pub min_iou: f64,
    pub include_gt_pair: bool,
    pub clip_to_video: bool,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        let p = PerturbationConfig::default();
        Self {
            delta_cap: p.delta_cap,
            step: p.step,
            min_iou: p.min_iou,
            include_gt_pair: p.include_gt_pair,
            clip_to_video: p.clip_to_video,
        }
    }
}

impl From<&PerturbationSection> for PerturbationConfig {
    fn from(s: &PerturbationSection) -> Self {
        PerturbationConfig {
            delta_cap: s.delta_cap,
            step: s.step,
            min_iou: s.min_iou,
            include_gt_pair: s.include_gt_pair,
            clip_to_video: s.clip_to_video,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldConfig {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationConfig {
    pub factor: f64,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self { factor: 2.0, seed: 0 }
    }
}

/// A multiple-choice question annotators must answer before labeling phases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlQuestion {
    pub prompt: String,
    pub choices: Vec<String>,
    pub correct_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    /// Rewrite the snapshot after this many accepted annotations.
    pub snapshot_every: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:7878".into(),
            snapshot_every: 50,
        }
    }
}

impl ProjectConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, IoError> {
        let cfg: ProjectConfig = serde_json::from_slice(bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn perturbation(&self) -> PerturbationConfig {
        PerturbationConfig::from(&self.perturbation)
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let bad = |m: String| Err(IoError::Config(m));
        self.perturbation()
            .validate()
            .map_err(|e| IoError::Config(e.to_string()))?;
        if self.folds.k < 2 {
            return bad(format!("folds.k must be at least 2, got {}", self.folds.k));
        }
        if !(self.augmentation.factor.is_finite() && self.augmentation.factor >= 1.0) {
            return bad(format!(
                "augmentation.factor must be >= 1, got {}",
                self.augmentation.factor
            ));
        }
        for (i, q) in self.control_questions.iter().enumerate() {
            if q.choices.len() < 2 || q.correct_index >= q.choices.len() {
                return bad(format!(
                    "control question {i} needs >= 2 choices and a valid correct_index"
                ));
            }
        }
        if self.service.snapshot_every == 0 {
            return bad("service.snapshot_every must be positive".into());
        }
        self.synthetic.validate().map_err(|e| IoError::Config(e.to_string()))?;
        Ok(())
    }

    /// Replaces every seed with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.folds.seed = seed;
        self.augmentation.seed = seed;
        self.synthetic.seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_protocol() {
        let c = ProjectConfig::from_json(b"{}").unwrap();
        assert_eq!(c.perturbation.delta_cap, 2.0);
        assert_eq!(c.perturbation.step, 0.5);
        assert_eq!(c.perturbation.min_iou, 0.5);
        assert_eq!(c.folds.k, 5);
        assert_eq!(c.augmentation.factor, 2.0);
        assert_eq!(c.gate_max_retries, 2);
    }

    #[test]
    fn partial_sections_and_questions() {
        let c = ProjectConfig::from_json(
            br#"{"perturbation":{"delta_cap":1.0,"step":0.25},
                 "folds":{"k":3,"seed":7,"stratified":false},
                 "control_questions":[{"prompt":"Which part is pre-actional?","choices":["a","b"],"correct_index":1}]}"#,
        )
        .unwrap();
        assert_eq!(c.perturbation.step, 0.25);
        assert_eq!(c.perturbation.min_iou, 0.5);
        assert_eq!(c.folds.seed, 7);
        assert_eq!(c.control_questions[0].correct_index, 1);
    }

    #[test]
    fn invariants_enforced() {
        for bad in [
            r#"{"perturbation":{"delta_cap":0}}"#,
            r#"{"perturbation":{"step":3}}"#,
            r#"{"perturbation":{"min_iou":0}}"#,
            r#"{"folds":{"k":1}}"#,
            r#"{"augmentation":{"factor":0.5}}"#,
            r#"{"control_questions":[{"prompt":"p","choices":["a","b"],"correct_index":2}]}"#,
            r#"{"unknown":1}"#,
        ] {
            assert!(ProjectConfig::from_json(bad.as_bytes()).is_err(), "{bad}");
        }
    }

    #[test]
    fn json_round_trip() {
        let mut c = ProjectConfig::default();
        c.override_seed(99);
        assert_eq!(ProjectConfig::from_json(c.to_json().as_bytes()).unwrap(), c);
    }
}
