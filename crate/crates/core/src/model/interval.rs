use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Absolute tolerance for comparing two times, in seconds.
pub const TIME_EPS: f64 = 1e-6;

/// Converts seconds to whole milliseconds, rounding to nearest.
pub fn to_ms(seconds: f64) -> i64 {
    (seconds * 1000.0).round() as i64
}

/// Converts whole milliseconds back to seconds.
pub fn from_ms(ms: i64) -> f64 {
    ms as f64 / 1000.0
}

/// Rounds a time to the nearest millisecond.
pub fn snap_ms(seconds: f64) -> f64 {
    from_ms(to_ms(seconds))
}

/// Returns true when two times are equal within [`TIME_EPS`].
pub fn times_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIME_EPS
}

/// A closed-open span `[start, end)` of video time, in seconds.
///
/// Construction enforces `0 <= start < end` with both ends finite, so every
/// value of this type has a strictly positive duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval", into = "RawInterval")]
pub struct TimeInterval {
    start: f64,
    end: f64,
}

/// Unchecked `{start, end}` pair, as it arrives from files or requests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawInterval {
    pub start: f64,
    pub end: f64,
}

impl TimeInterval {
    pub fn new(start: f64, end: f64) -> Result<Self, ModelError> {
        if !start.is_finite() || !end.is_finite() {
            return Err(ModelError::NonFinite);
        }
        if start < 0.0 {
            return Err(ModelError::NegativeStart { start });
        }
        if start >= end {
            return Err(ModelError::EmptyInterval { start, end });
        }
        Ok(Self { start, end })
    }

    /// Builds an interval from whole-millisecond endpoints.
    pub fn from_ms(start_ms: i64, end_ms: i64) -> Result<Self, ModelError> {
        Self::new(from_ms(start_ms), from_ms(end_ms))
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Length of the intersection with `other`, zero when disjoint.
    pub fn overlap(&self, other: &TimeInterval) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }

    /// Returns the same interval with both endpoints rounded to the nearest
    /// millisecond, or an error if rounding collapses it.
    pub fn snapped(&self) -> Result<Self, ModelError> {
        Self::new(snap_ms(self.start), snap_ms(self.end))
    }

    pub fn contains_time(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }

    /// True when `self` lies inside `[0, limit]` within [`TIME_EPS`].
    pub fn within(&self, limit: f64) -> bool {
        self.end <= limit + TIME_EPS
    }
}

impl TryFrom<RawInterval> for TimeInterval {
    type Error = ModelError;

    fn try_from(raw: RawInterval) -> Result<Self, Self::Error> {
        Self::new(raw.start, raw.end)
    }
}

impl From<TimeInterval> for RawInterval {
    fn from(iv: TimeInterval) -> Self {
        RawInterval {
            start: iv.start,
            end: iv.end,
        }
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.3}, {:.3})", self.start, self.end)
    }
}

/// Intersection-over-union of two intervals.
///
/// The union is the total covered length, `|a| + |b| - |a ∩ b|`, so disjoint
/// intervals score 0 and identical ones score 1.
pub fn iou(a: &TimeInterval, b: &TimeInterval) -> f64 {
    let overlap = a.overlap(b);
    if overlap <= 0.0 {
        return 0.0;
    }
    let union = a.duration() + b.duration() - overlap;
    (overlap / union).clamp(0.0, 1.0)
}

/// Signed boundary displacement of a generated interval relative to its
/// ground truth. Negative shifts mean the generated boundary comes earlier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shifts {
    pub start_shift: f64,
    pub end_shift: f64,
    pub length_diff: f64,
}

pub fn shifts(gt: &TimeInterval, generated: &TimeInterval) -> Shifts {
    Shifts {
        start_shift: generated.start - gt.start,
        end_shift: generated.end - gt.end,
        length_diff: generated.duration() - gt.duration(),
    }
}
