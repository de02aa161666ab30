//! `generate` against a brute-force enumeration that shares no code with it.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rubicon_core::model::{TimeInterval, VideoMeta};
use rubicon_core::perturb::{candidate_ends, candidate_starts, generate, PerturbationConfig};

/// Every whole-millisecond (start, end) pair within `Δ` of the ground truth
/// whose offset from the ground truth is a multiple of `δ`, filtered by exact
/// rational IoU.
fn oracle(gt: (f64, f64), cfg: &PerturbationConfig, duration: Option<f64>) -> BTreeSet<(i64, i64)> {
    let ms = |x: f64| (x * 1000.0).round() as i64;
    let (gs, ge) = (ms(gt.0), ms(gt.1));
    let (delta, step) = (ms(cfg.delta_cap), ms(cfg.step));
    let min_iou_micro = (cfg.min_iou * 1e6).round() as i128;
    let limit = duration
        .filter(|_| cfg.clip_to_video)
        .map(|d| (d * 1000.0).round() as i64);
    let mut out = BTreeSet::new();
    for s in gs - delta..=gs + delta {
        if (s - gs).rem_euclid(step) != 0 || s < 0 {
            continue;
        }
        for e in ge - delta..=ge + delta {
            if (e - ge).rem_euclid(step) != 0 || e <= s || limit.is_some_and(|l| e > l) {
                continue;
            }
            if !cfg.include_gt_pair && s == gs && e == ge {
                continue;
            }
            let inter = (e.min(ge) - s.max(gs)).max(0) as i128;
            let union = ((e - s) + (ge - gs)) as i128 - inter;
            if inter * 1_000_000 >= min_iou_micro * union {
                out.insert((s, e));
            }
        }
    }
    out
}

fn produced(gt: (f64, f64), cfg: &PerturbationConfig, duration: Option<f64>) -> BTreeSet<(i64, i64)> {
    let video = duration.map(|d| VideoMeta::new("v", d, 25.0).unwrap());
    let gt = TimeInterval::new(gt.0, gt.1).unwrap();
    let segs = generate("a", &gt, cfg, video.as_ref()).unwrap();
    let set: BTreeSet<_> = segs
        .iter()
        .map(|g| {
            (
                (g.interval.start() * 1000.0).round() as i64,
                (g.interval.end() * 1000.0).round() as i64,
            )
        })
        .collect();
    assert_eq!(set.len(), segs.len(), "duplicate intervals");
    set
}

fn cfg(delta_cap: f64, step: f64, min_iou: f64) -> PerturbationConfig {
    PerturbationConfig {
        delta_cap,
        step,
        min_iou,
        ..Default::default()
    }
}

#[test]
fn default_grid_has_nine_candidates_per_boundary() {
    let gt = TimeInterval::new(10.0, 12.0).unwrap();
    let c = PerturbationConfig::default();
    assert_eq!((c.delta_cap, c.step, c.min_iou), (2.0, 0.5, 0.5));
    assert_eq!(
        candidate_starts(&gt, &c).unwrap(),
        vec![8.0, 8.5, 9.0, 9.5, 10.0, 10.5, 11.0, 11.5, 12.0]
    );
    assert_eq!(
        candidate_ends(&gt, &c).unwrap(),
        vec![10.0, 10.5, 11.0, 11.5, 12.0, 12.5, 13.0, 13.5, 14.0]
    );
}

#[test]
fn half_second_cap_yields_the_eight_hand_enumerated_segments() {
    let got = produced((10.0, 12.0), &cfg(0.5, 0.5, 0.5), Some(100.0));
    let want: BTreeSet<(i64, i64)> = [
        (9500, 11500),
        (9500, 12000),
        (9500, 12500),
        (10000, 11500),
        (10000, 12500),
        (10500, 11500),
        (10500, 12000),
        (10500, 12500),
    ]
    .into();
    assert_eq!(got, want);
}

#[test]
fn unit_threshold_keeps_only_identity() {
    let c = PerturbationConfig {
        min_iou: 1.0,
        include_gt_pair: true,
        ..Default::default()
    };
    assert_eq!(produced((10.0, 12.0), &c, None), [(10000, 12000)].into());
}

#[test]
fn default_config_on_ten_to_twelve_matches_oracle() {
    let c = PerturbationConfig::default();
    let got = produced((10.0, 12.0), &c, Some(100.0));
    assert_eq!(got, oracle((10.0, 12.0), &c, Some(100.0)));
    assert!(!got.is_empty());
}

#[test]
fn clipping_drops_ends_past_duration() {
    let c = PerturbationConfig::default();
    let got = produced((10.0, 12.0), &c, Some(12.5));
    assert!(got.iter().all(|&(_, e)| e <= 12500));
    assert_eq!(got, oracle((10.0, 12.0), &c, Some(12.5)));
}

#[test]
fn near_zero_start_drops_negative_candidates() {
    let c = PerturbationConfig::default();
    let got = produced((0.5, 3.0), &c, None);
    assert!(got.iter().all(|&(s, _)| s >= 0));
    assert_eq!(got, oracle((0.5, 3.0), &c, None));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn generate_equals_oracle(
        grid in prop::sample::select(vec![(2.0, 0.5), (1.0, 0.25), (0.5, 0.5)]),
        start_ms in 0i64..60_000,
        len_ms in 1i64..8_000,
        min_iou in prop::sample::select(vec![0.1, 0.3, 0.5, 0.6, 0.75, 0.9, 1.0]),
        include_gt_pair: bool,
        clip in prop::option::of(0i64..4_000),
    ) {
        let gt = (start_ms as f64 / 1000.0, (start_ms + len_ms) as f64 / 1000.0);
        let mut c = cfg(grid.0, grid.1, min_iou);
        c.include_gt_pair = include_gt_pair;
        let duration = clip.map(|extra| (start_ms + len_ms + extra) as f64 / 1000.0);
        prop_assert_eq!(produced(gt, &c, duration), oracle(gt, &c, duration));
    }
}
