use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Duration and frame rate of one video. Frames are only a presentation view;
/// all arithmetic happens in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub duration: f64,
    pub frame_rate: f64,
}

impl VideoMeta {
    pub fn new(video_id: impl Into<String>, duration: f64, frame_rate: f64) -> Result<Self, ModelError> {
        let meta = Self {
            video_id: video_id.into(),
            duration,
            frame_rate,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.video_id.is_empty() {
            return Err(ModelError::InvalidVideo("empty video_id".into()));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(ModelError::InvalidVideo(format!(
                "{}: duration must be positive",
                self.video_id
            )));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(ModelError::InvalidVideo(format!(
                "{}: frame_rate must be positive",
                self.video_id
            )));
        }
        Ok(())
    }

    pub fn frame_to_time(&self, frame: i64) -> Result<f64, ModelError> {
        if frame < 0 {
            return Err(ModelError::NegativeFrame(frame));
        }
        Ok(frame as f64 / self.frame_rate)
    }

    /// Nearest frame to time `t`.
    pub fn time_to_frame(&self, t: f64) -> Result<i64, ModelError> {
        if !t.is_finite() || t < 0.0 {
            return Err(ModelError::NegativeTime(t));
        }
        Ok((t * self.frame_rate).round() as i64)
    }
}

/// Video metadata keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VideoIndex {
    videos: BTreeMap<String, VideoMeta>,
}

impl VideoIndex {
    pub fn new(videos: impl IntoIterator<Item = VideoMeta>) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for v in videos {
            v.validate()?;
            if map.contains_key(&v.video_id) {
                return Err(ModelError::InvalidVideo(format!("duplicate video_id {}", v.video_id)));
            }
            map.insert(v.video_id.clone(), v);
        }
        Ok(Self { videos: map })
    }

    pub fn get(&self, video_id: &str) -> Option<&VideoMeta> {
        self.videos.get(video_id)
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VideoMeta> {
        self.videos.values()
    }
}
