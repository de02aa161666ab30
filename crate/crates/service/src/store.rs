//! Append-only NDJSON log plus periodic CSV snapshots.
//!
//! Every entry is one line terminated by `\n` and is fsynced before the
//! caller acknowledges it. On open, a trailing partial line (a write cut
//! short by a crash) is truncated away; any other unparsable line is
//! corruption and refuses to open.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rubicon_core::io::serialize_annotations;
use rubicon_core::model::{AnnotationRecord, Schema};
use serde::{Deserialize, Serialize};

/// Aborts the process halfway through the N-th append when set to N.
pub const FAULT_ENV: &str = "RUBICON_FAULT_TORN_WRITE";

pub const LOG_FILE: &str = "log.ndjson";
pub const SNAPSHOT_CSV: &str = "snapshot.csv";
pub const SNAPSHOT_META: &str = "snapshot.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{LOG_FILE} line {line} is corrupt: {message}")]
    Corrupt { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogEntry {
    SessionCreated {
        session_id: String,
        annotator_id: String,
        schema: Schema,
    },
    GateAttempt {
        session_id: String,
        answers: Vec<usize>,
        passed: bool,
    },
    Annotation {
        session_id: String,
        record: AnnotationRecord,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        supersedes: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    /// Log entries replayed to produce the snapshot.
    pub log_entries: usize,
    pub annotations: usize,
}

/// Single writer over the log file of one project directory.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    file: File,
    entries: usize,
    appends: u64,
    fault_at: Option<u64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Store {
    /// Opens or creates the log, truncates a torn tail, and returns every
    /// complete entry in write order.
    pub fn open(dir: &Path) -> Result<(Self, Vec<LogEntry>), StoreError> {
        let path = dir.join(LOG_FILE);
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io_err(&path))?;
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if complete < bytes.len() {
            file.set_len(complete as u64).map_err(io_err(&path))?;
            file.sync_all().map_err(io_err(&path))?;
        }
        let mut entries = Vec::new();
        for (i, line) in bytes[..complete].split(|&b| b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let entry = serde_json::from_slice(line).map_err(|e| StoreError::Corrupt {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        let fault_at = std::env::var(FAULT_ENV).ok().and_then(|v| v.parse().ok());
        let store = Self {
            dir: dir.to_path_buf(),
            file,
            entries: entries.len(),
            appends: 0,
            fault_at,
        };
        Ok((store, entries))
    }

    pub fn len(&self) -> usize {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }

    /// Writes one entry and syncs it to disk before returning.
    pub fn append(&mut self, entry: &LogEntry) -> Result<(), StoreError> {
        let path = self.dir.join(LOG_FILE);
        let mut line = serde_json::to_vec(entry).expect("log entries serialize");
        line.push(b'\n');
        self.appends += 1;
        if self.fault_at == Some(self.appends) {
            let _ = self.file.write_all(&line[..line.len() / 2]);
            let _ = self.file.sync_data();
            std::process::abort();
        }
        self.file.write_all(&line).map_err(io_err(&path))?;
        self.file.sync_data().map_err(io_err(&path))?;
        self.entries += 1;
        Ok(())
    }

    /// Replaces the snapshot with `records`, atomically per file.
    pub fn write_snapshot(&self, records: &[AnnotationRecord]) -> Result<(), StoreError> {
        let meta = SnapshotMeta {
            log_entries: self.entries,
            annotations: records.len(),
        };
        let mut meta_json = serde_json::to_vec_pretty(&meta).expect("snapshot meta serializes");
        meta_json.push(b'\n');
        write_atomic(&self.dir.join(SNAPSHOT_CSV), &serialize_annotations(records))?;
        write_atomic(&self.dir.join(SNAPSHOT_META), &meta_json)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_snapshot_meta(dir: &Path) -> Option<SnapshotMeta> {
    let bytes = fs::read(dir.join(SNAPSHOT_META)).ok()?;
    serde_json::from_slice(&bytes).ok()
}

/// Current records after applying supersessions, ordered by annotation id.
pub fn current_records(entries: &[LogEntry]) -> Vec<AnnotationRecord> {
    let mut live = std::collections::BTreeMap::new();
    for e in entries {
        if let LogEntry::Annotation { record, supersedes, .. } = e {
            if let Some(old) = supersedes {
                live.remove(old);
            }
            live.insert(record.annotation_id.clone(), record.clone());
        }
    }
    live.into_values().collect()
}
