//! Domain types and interval arithmetic shared by every other module.

mod class;
mod interval;
mod record;
mod video;

pub use class::ActionClass;
pub use interval::{from_ms, iou, shifts, snap_ms, times_equal, to_ms, RawInterval, Shifts, TimeInterval, TIME_EPS};
pub use record::{check_video_bounds, AnnotationRecord, Extent, RbAnnotation, RecordDraft, Schema};
pub use video::{VideoIndex, VideoMeta};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("interval endpoints must be finite")]
    NonFinite,
    #[error("interval start {start} is negative")]
    NegativeStart { start: f64 },
    #[error("interval [{start}, {end}) has no positive duration")]
    EmptyInterval { start: f64, end: f64 },
    #[error("RB adjacency violated (gap {gap} s)")]
    RbAdjacency { gap: f64 },
    #[error("invalid class token {0:?}: tokens are non-empty lowercase words")]
    InvalidClassToken(String),
    #[error("unknown schema {0:?}")]
    UnknownSchema(String),
    #[error("invalid video metadata: {0}")]
    InvalidVideo(String),
    #[error("negative frame index {0}")]
    NegativeFrame(i64),
    #[error("time {0} must be a non-negative finite number")]
    NegativeTime(f64),
}
