//! Grid perturbation of ground-truth boundaries.
//!
//! Candidate starts and ends are taken on a grid of step `δ` reaching `Δ` on
//! either side of the ground-truth boundary. Every (start, end) combination
//! whose IoU with the ground truth reaches `min_iou` becomes a
//! [`GeneratedSegment`]. All grid arithmetic runs on whole milliseconds so
//! the grid closes exactly at `±Δ` and threshold comparisons are exact.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Diagnostic, DiagnosticCode};
use crate::model::{from_ms, iou, shifts, to_ms, AnnotationRecord, TimeInterval, VideoIndex, VideoMeta};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PerturbError {
    #[error("delta_cap must be positive, got {0}")]
    DeltaCap(f64),
    #[error("step must satisfy 0 < step <= delta_cap, got {0}")]
    Step(f64),
    #[error("delta_cap and step must be whole milliseconds and delta_cap a whole multiple of step")]
    Grid,
    #[error("min_iou must lie in (0, 1], got {0}")]
    MinIou(f64),
    #[error("ground truth {0} cannot be represented at millisecond resolution")]
    GroundTruth(TimeInterval),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    /// Largest boundary displacement `Δ`, seconds.
    pub delta_cap: f64,
    /// Grid step `δ`, seconds.
    pub step: f64,
    pub min_iou: f64,
    /// Keep the candidate identical to the ground truth.
    pub include_gt_pair: bool,
    /// Drop candidates that end past the video's duration.
    pub clip_to_video: bool,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            delta_cap: 2.0,
            step: 0.5,
            min_iou: 0.5,
            include_gt_pair: false,
            clip_to_video: true,
        }
    }
}

/// Validated integer form of a [`PerturbationConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Grid {
    delta_ms: i64,
    step_ms: i64,
    /// Number of steps across `[-Δ, +Δ]`, i.e. `2Δ/δ`.
    steps: i64,
    /// `min_iou` in millionths.
    min_iou_micro: i64,
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<(), PerturbError> {
        self.grid().map(|_| ())
    }

    fn grid(&self) -> Result<Grid, PerturbError> {
        if !(self.delta_cap.is_finite() && self.delta_cap > 0.0) {
            return Err(PerturbError::DeltaCap(self.delta_cap));
        }
        if !(self.step.is_finite() && self.step > 0.0 && self.step <= self.delta_cap) {
            return Err(PerturbError::Step(self.step));
        }
        if !(self.min_iou.is_finite() && self.min_iou > 0.0 && self.min_iou <= 1.0) {
            return Err(PerturbError::MinIou(self.min_iou));
        }
        let delta_ms = to_ms(self.delta_cap);
        let step_ms = to_ms(self.step);
        let whole = |x: f64, ms: i64| (x * 1000.0 - ms as f64).abs() < 1e-6;
        if step_ms == 0 || !whole(self.delta_cap, delta_ms) || !whole(self.step, step_ms) || delta_ms % step_ms != 0 {
            return Err(PerturbError::Grid);
        }
        Ok(Grid {
            delta_ms,
            step_ms,
            steps: 2 * delta_ms / step_ms,
            min_iou_micro: (self.min_iou * 1e6).round() as i64,
        })
    }

    /// Number of candidates on each side: `2Δ/δ + 1`.
    pub fn candidates_per_boundary(&self) -> Result<usize, PerturbError> {
        Ok(self.grid()?.steps as usize + 1)
    }
}

/// A perturbed copy of a ground-truth interval with its descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSegment {
    pub segment_id: String,
    pub source_annotation_id: String,
    pub interval: TimeInterval,
    pub iou_vs_gt: f64,
    pub start_shift: f64,
    pub end_shift: f64,
    pub length_diff: f64,
}

fn grid_points(center_ms: i64, grid: &Grid) -> impl Iterator<Item = i64> + '_ {
    (0..=grid.steps).map(move |i| center_ms - grid.delta_ms + i * grid.step_ms)
}

/// Candidate start times `{s − Δ, s − Δ + δ, …, s + Δ}`, ascending.
pub fn candidate_starts(gt: &TimeInterval, cfg: &PerturbationConfig) -> Result<Vec<f64>, PerturbError> {
    let grid = cfg.grid()?;
    Ok(grid_points(to_ms(gt.start()), &grid).map(from_ms).collect())
}

/// Candidate end times `{e − Δ, …, e + Δ}`, ascending.
pub fn candidate_ends(gt: &TimeInterval, cfg: &PerturbationConfig) -> Result<Vec<f64>, PerturbError> {
    let grid = cfg.grid()?;
    Ok(grid_points(to_ms(gt.end()), &grid).map(from_ms).collect())
}

/// Builds the id of the candidate at grid indices `(i, j)`.
pub fn segment_id(source_id: &str, start_index: usize, end_index: usize) -> String {
    format!("{source_id}#s{start_index}e{end_index}")
}

/// Enumerates all start/end combinations around `gt` and keeps those that
/// form a valid interval with IoU at least `min_iou`.
///
/// `gt` is first rounded to whole milliseconds; descriptors are relative to
/// that rounded interval. Output is sorted by (start, end).
pub fn generate(
    source_id: &str,
    gt: &TimeInterval,
    cfg: &PerturbationConfig,
    video: Option<&VideoMeta>,
) -> Result<Vec<GeneratedSegment>, PerturbError> {
    let grid = cfg.grid()?;
    let gt = gt.snapped().map_err(|_| PerturbError::GroundTruth(*gt))?;
    let (gt_s, gt_e) = (to_ms(gt.start()), to_ms(gt.end()));
    let gt_len = gt_e - gt_s;
    let limit_ms = match (cfg.clip_to_video, video) {
        (true, Some(v)) => Some((v.duration * 1000.0 + 1e-6).floor() as i64),
        _ => None,
    };
    let centre = grid.steps / 2;

    let mut out = Vec::new();
    for (i, s) in grid_points(gt_s, &grid).enumerate() {
        if s < 0 {
            continue;
        }
        for (j, e) in grid_points(gt_e, &grid).enumerate() {
            if e <= s {
                continue;
            }
            if limit_ms.is_some_and(|limit| e > limit) {
                continue;
            }
            if !cfg.include_gt_pair && i as i64 == centre && j as i64 == centre {
                continue;
            }
            let overlap = (e.min(gt_e) - s.max(gt_s)).max(0);
            let union = (e - s) + gt_len - overlap;
            if (overlap as i128) * 1_000_000 < (grid.min_iou_micro as i128) * (union as i128) {
                continue;
            }
            let interval = TimeInterval::from_ms(s, e).expect("0 <= s < e");
            let d = shifts(&gt, &interval);
            out.push(GeneratedSegment {
                segment_id: segment_id(source_id, i, j),
                source_annotation_id: source_id.to_string(),
                interval,
                iou_vs_gt: iou(&gt, &interval),
                start_shift: d.start_shift,
                end_shift: d.end_shift,
                length_diff: d.length_diff,
            });
        }
    }
    Ok(out)
}

/// Generates segments for every record, in ascending annotation id order.
/// Records whose video is unknown while clipping is requested are still
/// processed without an upper bound and reported.
pub fn generate_all(
    records: &[AnnotationRecord],
    cfg: &PerturbationConfig,
    videos: &VideoIndex,
) -> Result<(Vec<GeneratedSegment>, Vec<Diagnostic>), PerturbError> {
    cfg.validate()?;
    let mut sorted: Vec<&AnnotationRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.annotation_id.cmp(&b.annotation_id));
    let mut out = Vec::new();
    let mut diags = Vec::new();
    for r in sorted {
        let video = videos.get(&r.video_id);
        if cfg.clip_to_video && video.is_none() && !videos.is_empty() {
            diags.push(Diagnostic::new(
                DiagnosticCode::UnknownVideo,
                format!("{}: video {} unknown, not clipped", r.annotation_id, r.video_id),
            ));
        }
        out.extend(generate(&r.annotation_id, &r.full_interval(), cfg, video)?);
    }
    Ok((out, diags))
}

/// Tolerance used when placing IoU values into threshold bins.
pub const IOU_BIN_EPS: f64 = 1e-9;

/// Bin edges for the robustness tables.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorBins {
    /// Start/end shift bin centres `{−Δ, …, +Δ}`, milliseconds.
    pub shift_bins_ms: Vec<i64>,
    /// Length-difference bin centres `{−2Δ, …, +2Δ}`, milliseconds.
    pub length_bins_ms: Vec<i64>,
    /// Cumulative thresholds; a segment counts toward `t` when `IoU > t`.
    pub iou_thresholds: Vec<f64>,
    /// Disjoint `(lower, upper]` buckets.
    pub iou_buckets: Vec<(f64, f64)>,
    step_ms: i64,
    delta_ms: i64,
}

const IOU_EDGES: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

pub fn descriptor_bins(cfg: &PerturbationConfig) -> Result<DescriptorBins, PerturbError> {
    let grid = cfg.grid()?;
    let shift_bins_ms = (0..=grid.steps).map(|i| -grid.delta_ms + i * grid.step_ms).collect();
    let length_bins_ms = (0..=2 * grid.steps)
        .map(|i| -2 * grid.delta_ms + i * grid.step_ms)
        .collect();
    Ok(DescriptorBins {
        shift_bins_ms,
        length_bins_ms,
        iou_thresholds: IOU_EDGES[..5].to_vec(),
        iou_buckets: IOU_EDGES.windows(2).map(|w| (w[0], w[1])).collect(),
        step_ms: grid.step_ms,
        delta_ms: grid.delta_ms,
    })
}

impl DescriptorBins {
    fn on_grid(&self, value: f64, half_range_ms: i64) -> Option<i64> {
        let ms = to_ms(value);
        (ms.abs() <= half_range_ms && ms % self.step_ms == 0).then_some(ms)
    }

    /// Shift bin for a start or end shift, `None` when off the grid.
    pub fn shift_bin(&self, shift: f64) -> Option<i64> {
        self.on_grid(shift, self.delta_ms)
    }

    pub fn length_bin(&self, length_diff: f64) -> Option<i64> {
        self.on_grid(length_diff, 2 * self.delta_ms)
    }

    /// Index of the disjoint bucket holding `iou`.
    pub fn iou_bucket(&self, iou: f64) -> Option<usize> {
        self.iou_buckets
            .iter()
            .position(|&(lo, hi)| iou > lo + IOU_BIN_EPS && iou <= hi + IOU_BIN_EPS)
    }

    /// Whether `iou` counts toward cumulative threshold `t`.
    pub fn above_threshold(iou: f64, t: f64) -> bool {
        iou > t + IOU_BIN_EPS
    }
}
