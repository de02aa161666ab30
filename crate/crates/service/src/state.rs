use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rubicon_core::consistency::{instance_feedback, InstanceFeedback, SchemeSelector};
use rubicon_core::diagnostics::{Diagnostic, DiagnosticCode};
use rubicon_core::io::{parse_videos, serialize_annotations, ProjectConfig};
use rubicon_core::model::{
    check_video_bounds, snap_ms, AnnotationRecord, RawInterval, RecordDraft, Schema, VideoIndex, VideoMeta,
};
use serde::{Deserialize, Serialize};

use crate::store::{current_records, LogEntry, Store, StoreError};

pub const CONFIG_FILE: &str = "config.json";
pub const VIDEOS_FILE: &str = "videos.json";
pub const TASKS_FILE: &str = "tasks.json";
pub const VIDEOS_DIR: &str = "videos";

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{path}: {message}")]
    Project { path: PathBuf, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("log replay: {0}")]
    Replay(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// One unit of work offered to every annotator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub video_id: String,
    pub instance_key: String,
    pub verb: String,
    pub noun: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStatus {
    #[serde(flatten)]
    pub task: Task,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub annotator_id: String,
    pub schema: Schema,
    pub passed_gate: bool,
    pub gate_attempts: u32,
    pub assigned_tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub passed: bool,
    pub retry_allowed: bool,
    pub attempts: u32,
}

/// Body of an annotation submission. Rubicon extents are given either as
/// two intervals or as three marks `[pre_start, boundary, end]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submission {
    pub session_id: String,
    pub video_id: String,
    pub verb: String,
    pub noun: String,
    pub instance_key: String,
    #[serde(default)]
    pub schema: Option<Schema>,
    #[serde(default)]
    pub interval: Option<RawInterval>,
    #[serde(default)]
    pub pre_actional: Option<RawInterval>,
    #[serde(default)]
    pub actional: Option<RawInterval>,
    #[serde(default)]
    pub marks: Option<[f64; 3]>,
    #[serde(default)]
    pub supersedes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accepted {
    pub accepted: bool,
    pub annotation_id: String,
    pub feedback: InstanceFeedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectKind {
    BadRequest,
    Forbidden,
    NotFound,
    Unprocessable,
    Internal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub kind: RejectKind,
    pub diagnostics: Vec<Diagnostic>,
}

impl Rejection {
    fn one(kind: RejectKind, code: DiagnosticCode, message: impl Into<String>) -> Self {
        Self {
            kind,
            diagnostics: vec![Diagnostic::new(code, message)],
        }
    }

    fn unknown_session(id: &str) -> Self {
        Self::one(
            RejectKind::NotFound,
            DiagnosticCode::UnknownSession,
            format!("unknown session {id}"),
        )
    }
}

impl From<StoreError> for Rejection {
    fn from(e: StoreError) -> Self {
        Self::one(RejectKind::Internal, DiagnosticCode::Storage, e.to_string())
    }
}

/// Static project files: configuration, video metadata, task list.
#[derive(Debug, Clone)]
pub struct Project {
    pub dir: PathBuf,
    pub config: ProjectConfig,
    pub videos: VideoIndex,
    pub tasks: Vec<Task>,
}

fn read_optional(path: &Path) -> Result<Option<Vec<u8>>, ServiceError> {
    match fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(ServiceError::Project {
            path: path.to_path_buf(),
            message: e.to_string(),
        }),
    }
}

impl Project {
    /// Missing files fall back to defaults: default config, no videos, no tasks.
    pub fn open(dir: &Path) -> Result<Self, ServiceError> {
        let err = |name: &str, message: String| ServiceError::Project {
            path: dir.join(name),
            message,
        };
        let config = match read_optional(&dir.join(CONFIG_FILE))? {
            Some(b) => ProjectConfig::from_json(&b).map_err(|e| err(CONFIG_FILE, e.to_string()))?,
            None => ProjectConfig::default(),
        };
        let videos = match read_optional(&dir.join(VIDEOS_FILE))? {
            Some(b) => parse_videos(&b).map_err(|e| err(VIDEOS_FILE, e.to_string()))?,
            None => Vec::new(),
        };
        let videos = VideoIndex::new(videos).map_err(|e| err(VIDEOS_FILE, e.to_string()))?;
        let tasks = match read_optional(&dir.join(TASKS_FILE))? {
            Some(b) => serde_json::from_slice(&b).map_err(|e| err(TASKS_FILE, e.to_string()))?,
            None => Vec::new(),
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            videos,
            tasks,
        })
    }

    /// File under `videos/` whose stem is `video_id`.
    pub fn video_file(&self, video_id: &str) -> Option<PathBuf> {
        self.videos.get(video_id)?;
        let mut hits: Vec<PathBuf> = fs::read_dir(self.dir.join(VIDEOS_DIR))
            .ok()?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.file_stem().and_then(|s| s.to_str()) == Some(video_id))
            .collect();
        hits.sort();
        hits.into_iter().next()
    }
}

/// In-memory state rebuilt from the log, with the log as its only writer.
#[derive(Debug)]
pub struct Annotator {
    project: Project,
    store: Store,
    sessions: BTreeMap<String, Session>,
    records: BTreeMap<String, AnnotationRecord>,
    annotation_entries: u64,
}

impl Annotator {
    pub fn open(project: Project) -> Result<Self, ServiceError> {
        let (store, entries) = Store::open(&project.dir)?;
        let mut app = Self {
            project,
            store,
            sessions: BTreeMap::new(),
            records: BTreeMap::new(),
            annotation_entries: 0,
        };
        for e in &entries {
            app.apply(e).map_err(ServiceError::Replay)?;
        }
        Ok(app)
    }

    pub fn project(&self) -> &Project {
        &self.project
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    fn apply(&mut self, entry: &LogEntry) -> Result<(), String> {
        match entry {
            LogEntry::SessionCreated {
                session_id,
                annotator_id,
                schema,
            } => {
                let session = Session {
                    session_id: session_id.clone(),
                    annotator_id: annotator_id.clone(),
                    schema: *schema,
                    passed_gate: *schema == Schema::Conventional,
                    gate_attempts: 0,
                    assigned_tasks: self.project.tasks.clone(),
                };
                self.sessions.insert(session_id.clone(), session);
            }
            LogEntry::GateAttempt { session_id, passed, .. } => {
                let s = self
                    .sessions
                    .get_mut(session_id)
                    .ok_or(format!("gate for unknown session {session_id}"))?;
                s.gate_attempts += 1;
                s.passed_gate |= passed;
            }
            LogEntry::Annotation { record, supersedes, .. } => {
                if let Some(old) = supersedes {
                    self.records.remove(old);
                }
                self.records.insert(record.annotation_id.clone(), record.clone());
                self.annotation_entries += 1;
            }
        }
        Ok(())
    }

    fn commit(&mut self, entry: LogEntry) -> Result<(), Rejection> {
        self.store.append(&entry)?;
        self.apply(&entry).expect("validated before append");
        Ok(())
    }

    pub fn create_session(&mut self, annotator_id: &str, schema: Schema) -> Result<Session, Rejection> {
        let annotator_id = annotator_id.trim();
        if annotator_id.is_empty() {
            return Err(Rejection::one(
                RejectKind::BadRequest,
                DiagnosticCode::MissingField,
                "annotator_id is empty",
            ));
        }
        let session_id = format!("s{:04}", self.sessions.len() + 1);
        self.commit(LogEntry::SessionCreated {
            session_id: session_id.clone(),
            annotator_id: annotator_id.to_string(),
            schema,
        })?;
        Ok(self.sessions[&session_id].clone())
    }

    fn max_attempts(&self) -> u32 {
        1 + self.project.config.gate_max_retries
    }

    pub fn answer_gate(&mut self, session_id: &str, answers: &[usize]) -> Result<GateOutcome, Rejection> {
        let max = self.max_attempts();
        let session = self
            .sessions
            .get(session_id)
            .ok_or_else(|| Rejection::unknown_session(session_id))?;
        if session.passed_gate {
            return Ok(GateOutcome {
                passed: true,
                retry_allowed: false,
                attempts: session.gate_attempts,
            });
        }
        if session.gate_attempts >= max {
            return Ok(GateOutcome {
                passed: false,
                retry_allowed: false,
                attempts: session.gate_attempts,
            });
        }
        let questions = &self.project.config.control_questions;
        if answers.len() != questions.len() {
            return Err(Rejection::one(
                RejectKind::BadRequest,
                DiagnosticCode::GateAnswerCount,
                format!("expected {} answers, got {}", questions.len(), answers.len()),
            ));
        }
        let passed = questions.iter().zip(answers).all(|(q, &a)| q.correct_index == a);
        self.commit(LogEntry::GateAttempt {
            session_id: session_id.to_string(),
            answers: answers.to_vec(),
            passed,
        })?;
        let attempts = self.sessions[session_id].gate_attempts;
        Ok(GateOutcome {
            passed,
            retry_allowed: !passed && attempts < max,
            attempts,
        })
    }

    pub fn tasks(&self, session_id: &str) -> Result<Vec<TaskStatus>, Rejection> {
        let session = self
            .sessions
            .get(session_id)
            .ok_or_else(|| Rejection::unknown_session(session_id))?;
        Ok(session
            .assigned_tasks
            .iter()
            .map(|t| TaskStatus {
                task: t.clone(),
                done: self
                    .records
                    .values()
                    .any(|r| r.annotator_id == session.annotator_id && r.instance_key == t.instance_key),
            })
            .collect())
    }

    pub fn submit(&mut self, sub: Submission) -> Result<Accepted, Rejection> {
        let session = self
            .sessions
            .get(&sub.session_id)
            .ok_or_else(|| Rejection::unknown_session(&sub.session_id))?
            .clone();
        if let Some(s) = sub.schema.filter(|s| *s != session.schema) {
            return Err(Rejection::one(
                RejectKind::Unprocessable,
                DiagnosticCode::SchemaMismatch,
                format!(
                    "session schema is {}, record schema is {}",
                    session.schema.as_str(),
                    s.as_str()
                ),
            ));
        }
        if !session.passed_gate {
            return Err(Rejection::one(
                RejectKind::Forbidden,
                DiagnosticCode::GateNotPassed,
                "control questions not passed for this session",
            ));
        }
        let snap = |r: RawInterval| RawInterval {
            start: snap_ms(r.start),
            end: snap_ms(r.end),
        };
        let (mut pre, mut act) = (sub.pre_actional.map(snap), sub.actional.map(snap));
        if let Some([a, b, c]) = sub.marks {
            pre = Some(snap(RawInterval { start: a, end: b }));
            act = Some(snap(RawInterval { start: b, end: c }));
        }
        let annotation_id = format!("a{:06}", self.annotation_entries + 1);
        let draft = RecordDraft {
            annotation_id: annotation_id.clone(),
            video_id: sub.video_id,
            verb: sub.verb,
            noun: sub.noun,
            annotator_id: session.annotator_id.clone(),
            instance_key: sub.instance_key,
            schema: Some(session.schema),
            interval: sub.interval.map(snap),
            pre_actional: pre,
            actional: act,
        };
        let mut diags = Vec::new();
        let record = match draft.build() {
            Ok(r) => Some(r),
            Err(d) => {
                diags.extend(d);
                None
            }
        };
        if let Some(d) = record
            .as_ref()
            .and_then(|r| check_video_bounds(r, &self.project.videos))
        {
            diags.push(d);
        }
        if let Some(old) = &sub.supersedes {
            let ok = self
                .records
                .get(old)
                .is_some_and(|r| r.annotator_id == session.annotator_id);
            if !ok {
                diags.push(Diagnostic::new(
                    DiagnosticCode::UnknownSupersede,
                    format!("{old} is not a current annotation of {}", session.annotator_id),
                ));
            }
        }
        let record = match record {
            Some(r) if diags.is_empty() => r,
            _ => {
                return Err(Rejection {
                    kind: RejectKind::Unprocessable,
                    diagnostics: diags,
                })
            }
        };
        let key = record.instance_key.clone();
        self.commit(LogEntry::Annotation {
            session_id: session.session_id.clone(),
            record,
            supersedes: sub.supersedes,
        })?;
        let every = self.project.config.service.snapshot_every as u64;
        if every > 0 && self.annotation_entries.is_multiple_of(every) {
            self.store.write_snapshot(&self.current())?;
        }
        let scheme = match session.schema {
            Schema::Conventional => SchemeSelector::Conventional,
            Schema::Rubicon => SchemeSelector::RbFull,
        };
        Ok(Accepted {
            accepted: true,
            annotation_id,
            feedback: self.feedback(&key, scheme)?,
        })
    }

    /// Agreement on an instance known from tasks or stored annotations.
    pub fn feedback(&self, instance_key: &str, scheme: SchemeSelector) -> Result<InstanceFeedback, Rejection> {
        let known = self.records.values().any(|r| r.instance_key == instance_key)
            || self.project.tasks.iter().any(|t| t.instance_key == instance_key);
        if !known {
            return Err(Rejection::one(
                RejectKind::NotFound,
                DiagnosticCode::UnknownInstance,
                format!("unknown instance {instance_key}"),
            ));
        }
        Ok(instance_feedback(instance_key, scheme, &self.current()))
    }

    /// Current records, ordered by annotation id.
    pub fn current(&self) -> Vec<AnnotationRecord> {
        self.records.values().cloned().collect()
    }

    pub fn export(&self) -> Vec<u8> {
        serialize_annotations(&self.current())
    }

    pub fn video_meta(&self, video_id: &str) -> Option<&VideoMeta> {
        self.project.videos.get(video_id)
    }
}

/// Records of a log replay, for offline checks against a live service.
pub fn replay_records(dir: &Path) -> Result<Vec<AnnotationRecord>, ServiceError> {
    let (_, entries) = Store::open(dir)?;
    Ok(current_records(&entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rubicon_core::io::{parse_annotations, ControlQuestion};

    fn project(name: &str, snapshot_every: usize) -> Project {
        let dir = std::env::temp_dir().join(format!("rubicon-state-{}-{name}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        let mut config = ProjectConfig::default();
        config.service.snapshot_every = snapshot_every;
        config.control_questions = vec![
            ControlQuestion {
                prompt: "q1".into(),
                choices: vec!["x".into(), "y".into()],
                correct_index: 1,
            },
            ControlQuestion {
                prompt: "q2".into(),
                choices: vec!["x".into(), "y".into(), "z".into()],
                correct_index: 2,
            },
        ];
        fs::write(dir.join(CONFIG_FILE), config.to_json()).unwrap();
        fs::write(
            dir.join(VIDEOS_FILE),
            br#"[{"video_id":"v1","duration":30.0,"frame_rate":30.0}]"#,
        )
        .unwrap();
        fs::write(
            dir.join(TASKS_FILE),
            br#"[{"video_id":"v1","instance_key":"i1","verb":"open","noun":"door"}]"#,
        )
        .unwrap();
        Project::open(&dir).unwrap()
    }

    fn conv(session: &str, s: f64, e: f64) -> Submission {
        Submission {
            session_id: session.into(),
            video_id: "v1".into(),
            verb: "open".into(),
            noun: "door".into(),
            instance_key: "i1".into(),
            interval: Some(RawInterval { start: s, end: e }),
            ..Default::default()
        }
    }

    fn rb(session: &str, pre: (f64, f64), act: (f64, f64)) -> Submission {
        Submission {
            session_id: session.into(),
            video_id: "v1".into(),
            verb: "open".into(),
            noun: "door".into(),
            instance_key: "i1".into(),
            pre_actional: Some(RawInterval {
                start: pre.0,
                end: pre.1,
            }),
            actional: Some(RawInterval {
                start: act.0,
                end: act.1,
            }),
            ..Default::default()
        }
    }

    #[test]
    fn sessions_and_gate_exemption() {
        let mut app = Annotator::open(project("sessions", 50)).unwrap();
        let a = app.create_session("ann1", Schema::Conventional).unwrap();
        let b = app.create_session("ann1", Schema::Rubicon).unwrap();
        assert!(a.passed_gate && !b.passed_gate);
        assert_ne!(a.session_id, b.session_id);
        assert_eq!(a.assigned_tasks.len(), 1);
        assert!(app.create_session("  ", Schema::Conventional).is_err());
    }

    #[test]
    fn gate_counter() {
        let mut app = Annotator::open(project("gate", 50)).unwrap();
        let s = app.create_session("ann1", Schema::Rubicon).unwrap().session_id;
        let r = app.submit(rb(&s, (1.0, 2.0), (2.0, 4.0))).unwrap_err();
        assert_eq!(r.diagnostics[0].code, DiagnosticCode::GateNotPassed);
        let wrong = [1, 0];
        assert_eq!(
            app.answer_gate(&s, &wrong).unwrap(),
            GateOutcome {
                passed: false,
                retry_allowed: true,
                attempts: 1
            }
        );
        assert!(app.answer_gate(&s, &wrong).unwrap().retry_allowed);
        assert_eq!(
            app.answer_gate(&s, &wrong).unwrap(),
            GateOutcome {
                passed: false,
                retry_allowed: false,
                attempts: 3
            }
        );
        assert!(!app.answer_gate(&s, &[1, 2]).unwrap().passed);
        assert_eq!(
            app.answer_gate(&s, &[1]).map_err(|r| r.kind),
            Ok(GateOutcome {
                passed: false,
                retry_allowed: false,
                attempts: 3
            })
        );

        let t = app.create_session("ann2", Schema::Rubicon).unwrap().session_id;
        assert_eq!(
            app.answer_gate(&t, &[1]).unwrap_err().diagnostics[0].code,
            DiagnosticCode::GateAnswerCount
        );
        assert!(app.answer_gate(&t, &[1, 2]).unwrap().passed);
        assert!(app.answer_gate(&t, &[0, 0]).unwrap().passed);
        app.submit(rb(&t, (1.0, 2.0), (2.0, 4.0))).unwrap();
    }

    #[test]
    fn submission_rejections() {
        let mut app = Annotator::open(project("reject", 50)).unwrap();
        let s = app.create_session("ann1", Schema::Rubicon).unwrap().session_id;
        app.answer_gate(&s, &[1, 2]).unwrap();
        let code = |r: Rejection| r.diagnostics[0].code;
        assert_eq!(
            code(app.submit(rb(&s, (1.0, 2.0), (2.5, 4.0))).unwrap_err()),
            DiagnosticCode::RbAdjacency
        );
        assert_eq!(
            code(app.submit(rb(&s, (1.0, 2.0), (2.0, 31.0))).unwrap_err()),
            DiagnosticCode::OutOfBounds
        );
        let mut unknown = rb(&s, (1.0, 2.0), (2.0, 3.0));
        unknown.video_id = "nope".into();
        assert_eq!(code(app.submit(unknown).unwrap_err()), DiagnosticCode::UnknownVideo);
        let mut mismatch = conv(&s, 1.0, 2.0);
        mismatch.schema = Some(Schema::Conventional);
        assert_eq!(code(app.submit(mismatch).unwrap_err()), DiagnosticCode::SchemaMismatch);
        assert_eq!(
            code(app.submit(conv("s9999", 1.0, 2.0)).unwrap_err()),
            DiagnosticCode::UnknownSession
        );
        assert!(app.current().is_empty());
    }

    #[test]
    fn feedback_matches_offline_computation_on_export() {
        let mut app = Annotator::open(project("feedback", 50)).unwrap();
        let a = app.create_session("ann1", Schema::Conventional).unwrap().session_id;
        let b = app.create_session("ann2", Schema::Conventional).unwrap().session_id;
        let c = app.create_session("ann3", Schema::Conventional).unwrap().session_id;
        let first = app.submit(conv(&a, 1.0001, 3.3333)).unwrap();
        assert_eq!(first.feedback.n_annotators, 1);
        assert!(first.feedback.pair_ious.is_empty() && first.feedback.mean.is_none());
        let same = app.submit(conv(&b, 1.0, 3.333)).unwrap();
        assert_eq!(same.feedback.mean, Some(1.0));
        let last = app.submit(conv(&c, 0.7777, 2.9)).unwrap();
        let offline = parse_annotations(&app.export()).unwrap().records;
        assert_eq!(
            instance_feedback("i1", SchemeSelector::Conventional, &offline),
            last.feedback
        );
        assert!(app.tasks(&a).unwrap()[0].done);
    }

    #[test]
    fn supersede_and_replay() {
        let p = project("supersede", 2);
        let dir = p.dir.clone();
        let mut app = Annotator::open(p.clone()).unwrap();
        let s = app.create_session("ann1", Schema::Rubicon).unwrap().session_id;
        app.answer_gate(&s, &[1, 2]).unwrap();
        let marks = Submission {
            marks: Some([1.0, 2.0, 4.0]),
            pre_actional: None,
            actional: None,
            ..rb(&s, (0.0, 1.0), (1.0, 2.0))
        };
        let first = app.submit(marks).unwrap();
        let mut fix = rb(&s, (1.5, 2.0), (2.0, 4.0));
        fix.supersedes = Some(first.annotation_id.clone());
        let second = app.submit(fix).unwrap();
        let mut bad = rb(&s, (1.5, 2.0), (2.0, 4.0));
        bad.supersedes = Some("a999999".into());
        assert_eq!(
            app.submit(bad).unwrap_err().diagnostics[0].code,
            DiagnosticCode::UnknownSupersede
        );
        let live = app.current();
        assert_eq!(live.len(), 1);
        assert_eq!(live[0].annotation_id, second.annotation_id);
        let before = app.export();
        drop(app);
        let app = Annotator::open(p).unwrap();
        assert_eq!(app.export(), before);
        assert!(app.session(&s).unwrap().passed_gate);
        assert_eq!(fs::read(dir.join(crate::store::SNAPSHOT_CSV)).unwrap(), before);
        assert_eq!(replay_records(&dir).unwrap(), app.current());
    }
}
