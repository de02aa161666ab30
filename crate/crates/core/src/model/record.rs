use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::interval::{times_equal, RawInterval, TimeInterval};
use super::video::VideoIndex;
use super::{ActionClass, ModelError};
use crate::diagnostics::{Diagnostic, DiagnosticCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    Conventional,
    Rubicon,
}

impl Schema {
    pub fn as_str(&self) -> &'static str {
        match self {
            Schema::Conventional => "conventional",
            Schema::Rubicon => "rubicon",
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Schema {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conventional" => Ok(Schema::Conventional),
            "rubicon" => Ok(Schema::Rubicon),
            other => Err(ModelError::UnknownSchema(other.to_string())),
        }
    }
}

/// Rubicon Boundaries label: a pre-actional phase immediately followed by the
/// actional phase. `actional.start == pre_actional.end` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRb")]
pub struct RbAnnotation {
    pre_actional: TimeInterval,
    actional: TimeInterval,
}

#[derive(Deserialize)]
struct RawRb {
    pre_actional: TimeInterval,
    actional: TimeInterval,
}

impl TryFrom<RawRb> for RbAnnotation {
    type Error = ModelError;

    fn try_from(raw: RawRb) -> Result<Self, Self::Error> {
        RbAnnotation::new(raw.pre_actional, raw.actional)
    }
}

impl RbAnnotation {
    /// Pairs two phases. The boundary may differ by at most
    /// [`TIME_EPS`](super::TIME_EPS); within that tolerance the actional start
    /// is set to the pre-actional end.
    pub fn new(pre_actional: TimeInterval, actional: TimeInterval) -> Result<Self, ModelError> {
        let gap = actional.start() - pre_actional.end();
        if !times_equal(actional.start(), pre_actional.end()) {
            return Err(ModelError::RbAdjacency { gap });
        }
        let actional = TimeInterval::new(pre_actional.end(), actional.end())?;
        Ok(Self { pre_actional, actional })
    }

    /// Builds both phases from the three transition points an annotator marks:
    /// start of the preliminary motion, start of the action, goal achieved.
    pub fn from_marks(pre_start: f64, boundary: f64, end: f64) -> Result<Self, ModelError> {
        Self::new(
            TimeInterval::new(pre_start, boundary)?,
            TimeInterval::new(boundary, end)?,
        )
    }

    pub fn pre_actional(&self) -> TimeInterval {
        self.pre_actional
    }

    pub fn actional(&self) -> TimeInterval {
        self.actional
    }

    /// Concatenation of both phases.
    pub fn full(&self) -> TimeInterval {
        TimeInterval::new(self.pre_actional.start(), self.actional.end())
            .expect("adjacent valid phases form a valid interval")
    }
}

/// The temporal extent of a record; which variant is present is the schema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extent {
    Conventional(TimeInterval),
    Rubicon(RbAnnotation),
}

/// One annotator's label of one object interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RecordRepr", into = "RecordRepr")]
pub struct AnnotationRecord {
    pub annotation_id: String,
    pub video_id: String,
    pub class: ActionClass,
    pub annotator_id: String,
    /// Groups labels of the same physical interaction by different annotators.
    pub instance_key: String,
    pub extent: Extent,
}

impl AnnotationRecord {
    pub fn schema(&self) -> Schema {
        match self.extent {
            Extent::Conventional(_) => Schema::Conventional,
            Extent::Rubicon(_) => Schema::Rubicon,
        }
    }

    /// The interval a conventional label covers, or the full RB segment.
    pub fn full_interval(&self) -> TimeInterval {
        match &self.extent {
            Extent::Conventional(iv) => *iv,
            Extent::Rubicon(rb) => rb.full(),
        }
    }

    pub fn rb(&self) -> Option<&RbAnnotation> {
        match &self.extent {
            Extent::Rubicon(rb) => Some(rb),
            Extent::Conventional(_) => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RecordRepr {
    annotation_id: String,
    video_id: String,
    class: ActionClass,
    annotator_id: String,
    instance_key: String,
    schema: Schema,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    interval: Option<TimeInterval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rb: Option<RbAnnotation>,
}

impl TryFrom<RecordRepr> for AnnotationRecord {
    type Error = String;

    fn try_from(r: RecordRepr) -> Result<Self, Self::Error> {
        let extent = match (r.schema, r.interval, r.rb) {
            (Schema::Conventional, Some(iv), None) => Extent::Conventional(iv),
            (Schema::Rubicon, None, Some(rb)) => Extent::Rubicon(rb),
            (schema, _, _) => return Err(format!("{schema} record must carry exactly its own extent field")),
        };
        Ok(AnnotationRecord {
            annotation_id: r.annotation_id,
            video_id: r.video_id,
            class: r.class,
            annotator_id: r.annotator_id,
            instance_key: r.instance_key,
            extent,
        })
    }
}

impl From<AnnotationRecord> for RecordRepr {
    fn from(r: AnnotationRecord) -> Self {
        let (interval, rb) = match r.extent {
            Extent::Conventional(iv) => (Some(iv), None),
            Extent::Rubicon(rb) => (None, Some(rb)),
        };
        RecordRepr {
            schema: if rb.is_some() {
                Schema::Rubicon
            } else {
                Schema::Conventional
            },
            annotation_id: r.annotation_id,
            video_id: r.video_id,
            class: r.class,
            annotator_id: r.annotator_id,
            instance_key: r.instance_key,
            interval,
            rb,
        }
    }
}

/// Unvalidated field values for one record, as read from a file row or a
/// service request. [`RecordDraft::build`] turns it into a record or into the
/// full list of problems found.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordDraft {
    pub annotation_id: String,
    pub video_id: String,
    pub verb: String,
    pub noun: String,
    pub annotator_id: String,
    pub instance_key: String,
    pub schema: Option<Schema>,
    pub interval: Option<RawInterval>,
    pub pre_actional: Option<RawInterval>,
    pub actional: Option<RawInterval>,
}

fn checked_interval(raw: RawInterval, what: &str, diags: &mut Vec<Diagnostic>) -> Option<TimeInterval> {
    match TimeInterval::try_from(raw) {
        Ok(iv) => Some(iv),
        Err(e) => {
            diags.push(Diagnostic::new(DiagnosticCode::InvalidInterval, format!("{what}: {e}")));
            None
        }
    }
}

/// Renders a gap in seconds at millisecond precision without trailing zeros.
pub(crate) fn fmt_seconds(x: f64) -> String {
    let v = (x * 1000.0).round() / 1000.0;
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

impl RecordDraft {
    pub fn build(self) -> Result<AnnotationRecord, Vec<Diagnostic>> {
        let mut diags = Vec::new();
        for (name, value) in [
            ("annotation_id", &self.annotation_id),
            ("video_id", &self.video_id),
            ("annotator_id", &self.annotator_id),
            ("instance_key", &self.instance_key),
        ] {
            if value.is_empty() {
                diags.push(Diagnostic::new(
                    DiagnosticCode::MissingField,
                    format!("{name} is empty"),
                ));
            }
        }
        let class = match ActionClass::new(&self.verb, &self.noun) {
            Ok(c) => Some(c),
            Err(e) => {
                diags.push(Diagnostic::new(DiagnosticCode::InvalidClass, e.to_string()));
                None
            }
        };

        let extent = match self.schema {
            None => {
                diags.push(Diagnostic::new(DiagnosticCode::MissingField, "schema is missing"));
                None
            }
            Some(Schema::Conventional) => {
                if self.pre_actional.is_some() || self.actional.is_some() {
                    diags.push(Diagnostic::new(
                        DiagnosticCode::UnexpectedField,
                        "conventional record carries RB phase fields",
                    ));
                }
                match self.interval {
                    None => {
                        diags.push(Diagnostic::new(
                            DiagnosticCode::MissingField,
                            "conventional record needs start_sec and end_sec",
                        ));
                        None
                    }
                    Some(raw) => checked_interval(raw, "interval", &mut diags).map(Extent::Conventional),
                }
            }
            Some(Schema::Rubicon) => match (self.pre_actional, self.actional) {
                (Some(pre), Some(act)) => {
                    let pre = checked_interval(pre, "pre-actional", &mut diags);
                    let act = checked_interval(act, "actional", &mut diags);
                    match (pre, act) {
                        (Some(pre), Some(act)) => match RbAnnotation::new(pre, act) {
                            Ok(rb) => {
                                if let Some(mirror) = self.interval {
                                    let full = rb.full();
                                    if !times_equal(mirror.start, full.start()) || !times_equal(mirror.end, full.end())
                                    {
                                        diags.push(Diagnostic::new(
                                            DiagnosticCode::FullMismatch,
                                            format!(
                                                "start_sec/end_sec [{}, {}] disagree with RB full segment {}",
                                                fmt_seconds(mirror.start),
                                                fmt_seconds(mirror.end),
                                                full
                                            ),
                                        ));
                                    }
                                }
                                Some(Extent::Rubicon(rb))
                            }
                            Err(ModelError::RbAdjacency { gap }) => {
                                diags.push(Diagnostic::new(
                                    DiagnosticCode::RbAdjacency,
                                    format!("RB adjacency violated (gap {} s)", fmt_seconds(gap)),
                                ));
                                None
                            }
                            Err(e) => {
                                diags.push(Diagnostic::new(DiagnosticCode::InvalidInterval, e.to_string()));
                                None
                            }
                        },
                        _ => None,
                    }
                }
                _ => {
                    diags.push(Diagnostic::new(
                        DiagnosticCode::MissingField,
                        "rubicon record needs all four phase times",
                    ));
                    None
                }
            },
        };

        match (class, extent) {
            (Some(class), Some(extent)) if diags.is_empty() => Ok(AnnotationRecord {
                annotation_id: self.annotation_id,
                video_id: self.video_id,
                class,
                annotator_id: self.annotator_id,
                instance_key: self.instance_key,
                extent,
            }),
            _ => Err(diags),
        }
    }
}

/// Checks a record against known video durations.
///
/// An empty index disables the check. A non-empty index must know the video.
pub fn check_video_bounds(record: &AnnotationRecord, videos: &VideoIndex) -> Option<Diagnostic> {
    if videos.is_empty() {
        return None;
    }
    let Some(meta) = videos.get(&record.video_id) else {
        return Some(Diagnostic::new(
            DiagnosticCode::UnknownVideo,
            format!("unknown video_id {}", record.video_id),
        ));
    };
    let full = record.full_interval();
    if !full.within(meta.duration) {
        return Some(Diagnostic::new(
            DiagnosticCode::OutOfBounds,
            format!(
                "end {} s exceeds duration {} s of video {}",
                fmt_seconds(full.end()),
                fmt_seconds(meta.duration),
                meta.video_id
            ),
        ));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VideoMeta;

    fn raw(start: f64, end: f64) -> Option<RawInterval> {
        Some(RawInterval { start, end })
    }

    fn draft() -> RecordDraft {
        RecordDraft {
            annotation_id: "a1".into(),
            video_id: "v1".into(),
            verb: "pour".into(),
            noun: "oil".into(),
            annotator_id: "ann1".into(),
            instance_key: "i1".into(),
            schema: Some(Schema::Rubicon),
            ..Default::default()
        }
    }

    #[test]
    fn rb_full_concatenates_phases() {
        let rb = RbAnnotation::from_marks(9.0, 10.0, 12.0).unwrap();
        assert_eq!(rb.full(), TimeInterval::new(9.0, 12.0).unwrap());
        assert_eq!(
            rb.full().duration(),
            rb.pre_actional().duration() + rb.actional().duration()
        );
    }

    #[test]
    fn rb_adjacency_tolerance() {
        let pre = TimeInterval::new(9.0, 10.0).unwrap();
        let ok = RbAnnotation::new(pre, TimeInterval::new(10.0 + 5e-7, 12.0).unwrap()).unwrap();
        assert_eq!(ok.actional().start(), ok.pre_actional().end());
        let err = RbAnnotation::new(pre, TimeInterval::new(10.5, 12.0).unwrap()).unwrap_err();
        assert!(matches!(err, ModelError::RbAdjacency { gap } if (gap - 0.5).abs() < 1e-12));
    }

    #[test]
    fn draft_reports_adjacency_gap() {
        let d = RecordDraft {
            pre_actional: raw(9.0, 10.0),
            actional: raw(10.5, 12.0),
            ..draft()
        };
        let diags = d.build().unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, DiagnosticCode::RbAdjacency);
        assert_eq!(diags[0].message, "RB adjacency violated (gap 0.5 s)");
    }

    #[test]
    fn draft_checks_full_mirror() {
        let d = RecordDraft {
            interval: raw(9.0, 12.5),
            pre_actional: raw(9.0, 10.0),
            actional: raw(10.0, 12.0),
            ..draft()
        };
        assert_eq!(d.build().unwrap_err()[0].code, DiagnosticCode::FullMismatch);
        let d = RecordDraft {
            interval: raw(9.0, 12.0),
            pre_actional: raw(9.0, 10.0),
            actional: raw(10.0, 12.0),
            ..draft()
        };
        assert!(d.build().is_ok());
    }

    #[test]
    fn conventional_draft_rejects_rb_fields() {
        let d = RecordDraft {
            schema: Some(Schema::Conventional),
            interval: raw(1.0, 2.0),
            actional: raw(1.0, 2.0),
            ..draft()
        };
        assert_eq!(d.build().unwrap_err()[0].code, DiagnosticCode::UnexpectedField);
    }

    #[test]
    fn draft_collects_every_problem() {
        let d = RecordDraft {
            annotation_id: String::new(),
            verb: "Pour".into(),
            schema: Some(Schema::Conventional),
            interval: raw(3.0, 1.0),
            ..draft()
        };
        let codes: Vec<_> = d.build().unwrap_err().into_iter().map(|d| d.code).collect();
        assert_eq!(
            codes,
            vec![
                DiagnosticCode::MissingField,
                DiagnosticCode::InvalidClass,
                DiagnosticCode::InvalidInterval
            ]
        );
    }

    #[test]
    fn bounds_check_against_video() {
        let rec = RecordDraft {
            schema: Some(Schema::Conventional),
            interval: raw(95.0, 101.0),
            ..draft()
        }
        .build()
        .unwrap();
        let videos = VideoIndex::new([VideoMeta::new("v1", 100.0, 30.0).unwrap()]).unwrap();
        assert_eq!(
            check_video_bounds(&rec, &videos).unwrap().code,
            DiagnosticCode::OutOfBounds
        );
        assert!(check_video_bounds(&rec, &VideoIndex::default()).is_none());
        let other = VideoIndex::new([VideoMeta::new("v2", 100.0, 30.0).unwrap()]).unwrap();
        assert_eq!(
            check_video_bounds(&rec, &other).unwrap().code,
            DiagnosticCode::UnknownVideo
        );
    }

    #[test]
    fn record_json_round_trip() {
        let rec = RecordDraft {
            pre_actional: raw(9.0, 10.0),
            actional: raw(10.0, 12.0),
            ..draft()
        }
        .build()
        .unwrap();
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains(r#""schema":"rubicon""#));
        let back: AnnotationRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
        let bad = json.replace(r#""start":10.0,"end":12.0"#, r#""start":10.5,"end":12.0"#);
        assert!(serde_json::from_str::<AnnotationRecord>(&bad).is_err());
    }
}
