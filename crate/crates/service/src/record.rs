//! Session recording and verified replay.
//!
//! A recorded session is the pipeline session log (`records.jsonl` plus
//! `images/`) and an `index.jsonl` with, per record, its event sequence
//! number and the SHA-256 of the log line and both image files.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use seethrough_core::pipeline::session_log::{Appended, LogEntry, LogError, RECORDS_FILE};
use seethrough_core::pipeline::{SessionLog, TransformRecord};
use seethrough_core::raster::sha256_hex;
use thiserror::Error;

use crate::hub::{EventBody, Hub, SessionEvent};
use crate::protocol::TransformMessage;

pub const INDEX_FILE: &str = "index.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub seq: u64,
    pub frame_id: u64,
    /// 1-based line in `records.jsonl`.
    pub record_line: usize,
    pub record_sha256: String,
    pub files: Vec<FileDigest>,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("index I/O on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub struct Recorder {
    log: SessionLog,
    index: File,
    index_path: PathBuf,
    lines: usize,
}

impl Recorder {
    /// Starts a fresh recording in `dir`. Existing session files are
    /// replaced so that a recording never mixes two runs.
    pub fn create(dir: &Path) -> Result<Self, RecordError> {
        for f in [RECORDS_FILE, INDEX_FILE] {
            let p = dir.join(f);
            if p.exists() {
                std::fs::remove_file(&p).map_err(|source| RecordError::Io { path: p.clone(), source })?;
            }
        }
        let log = SessionLog::open(dir)?;
        let index_path = dir.join(INDEX_FILE);
        let index = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&index_path)
            .map_err(|source| RecordError::Io { path: index_path.clone(), source })?;
        Ok(Recorder { log, index, index_path, lines: 0 })
    }

    pub fn append(&mut self, seq: u64, record: &TransformRecord) -> Result<Appended, RecordError> {
        let appended = self.log.append(record)?;
        self.lines += 1;
        let entry = IndexEntry {
            seq,
            frame_id: appended.entry.frame_id,
            record_line: self.lines,
            record_sha256: sha256_hex(appended.line.as_bytes()),
            files: vec![
                FileDigest { path: appended.entry.images.original.clone(), sha256: sha256_hex(&appended.original_png) },
                FileDigest { path: appended.entry.images.generated.clone(), sha256: sha256_hex(&appended.generated_png) },
            ],
        };
        let line = serde_json::to_string(&entry).expect("index entries serialize");
        writeln!(self.index, "{line}")
            .and_then(|_| self.index.flush())
            .map_err(|source| RecordError::Io { path: self.index_path.clone(), source })?;
        Ok(appended)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    /// A file is missing, unreadable, or does not match its recorded hash.
    #[error("corrupt session: {file}: {reason}")]
    CorruptSession { file: PathBuf, reason: String },
}

fn corrupt(file: impl Into<PathBuf>, reason: impl Into<String>) -> ReplayError {
    ReplayError::CorruptSession { file: file.into(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedEvent {
    pub seq: u64,
    pub captured_at: f64,
    pub entry: LogEntry,
    pub original_png: Arc<Vec<u8>>,
    pub generated_png: Arc<Vec<u8>>,
}

impl RecordedEvent {
    pub fn to_event(&self) -> SessionEvent {
        SessionEvent {
            seq: self.seq,
            body: EventBody::Transform {
                message: TransformMessage::from_entry(self.seq, &self.entry),
                original_png: self.original_png.clone(),
                generated_png: self.generated_png.clone(),
            },
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, ReplayError> {
    let file = File::open(path).map_err(|e| corrupt(path, e.to_string()))?;
    BufReader::new(file)
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| corrupt(path, e.to_string()))
}

/// Reads a recorded session, checking every hash in the index first.
pub fn load_session(dir: &Path) -> Result<Vec<RecordedEvent>, ReplayError> {
    let index_path = dir.join(INDEX_FILE);
    let records_path = dir.join(RECORDS_FILE);
    let index = read_lines(&index_path)?;
    let records = read_lines(&records_path)?;
    let mut out = Vec::with_capacity(index.len());
    let mut last_seq = None;
    for (i, line) in index.iter().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let ix: IndexEntry = serde_json::from_str(line).map_err(|e| corrupt(&index_path, format!("line {}: {e}", i + 1)))?;
        if last_seq.is_some_and(|s| ix.seq <= s) {
            return Err(corrupt(&index_path, format!("line {}: sequence numbers not increasing", i + 1)));
        }
        last_seq = Some(ix.seq);
        let record = records
            .get(ix.record_line.wrapping_sub(1))
            .ok_or_else(|| corrupt(&records_path, format!("missing line {}", ix.record_line)))?;
        if sha256_hex(record.as_bytes()) != ix.record_sha256 {
            return Err(corrupt(&records_path, format!("line {} does not match its hash", ix.record_line)));
        }
        let entry: LogEntry = serde_json::from_str(record).map_err(|e| corrupt(&records_path, format!("line {}: {e}", ix.record_line)))?;
        let mut images = Vec::with_capacity(2);
        for fd in &ix.files {
            let path = dir.join(&fd.path);
            let bytes = std::fs::read(&path).map_err(|e| corrupt(&path, e.to_string()))?;
            if sha256_hex(&bytes) != fd.sha256 {
                return Err(corrupt(&path, "contents do not match the recorded hash"));
            }
            images.push((fd.path.clone(), bytes));
        }
        let take = |want: &str| -> Result<Arc<Vec<u8>>, ReplayError> {
            images
                .iter()
                .find(|(p, _)| p == want)
                .map(|(_, b)| Arc::new(b.clone()))
                .ok_or_else(|| corrupt(&index_path, format!("line {}: no digest for {want}", i + 1)))
        };
        out.push(RecordedEvent {
            seq: ix.seq,
            captured_at: entry.captured_at,
            original_png: take(&entry.images.original)?,
            generated_png: take(&entry.images.generated)?,
            entry,
        });
    }
    Ok(out)
}

/// Re-emits recorded events into `hub`, spacing them by their recorded
/// capture times divided by `speed`. `speed <= 0` means as fast as
/// possible. No backend is invoked.
pub fn replay(events: &[RecordedEvent], speed: f64, hub: &Hub, stop: &AtomicBool) -> usize {
    let mut sent = 0;
    let mut prev: Option<f64> = None;
    for ev in events {
        if stop.load(Ordering::Relaxed) {
            break;
        }
        if let (Some(p), true) = (prev, speed > 0.0) {
            let gap = ((ev.captured_at - p) / speed).max(0.0);
            if gap > 0.0 {
                std::thread::sleep(Duration::from_secs_f64(gap.min(3600.0)));
            }
        }
        prev = Some(ev.captured_at);
        hub.republish(ev.to_event());
        sent += 1;
    }
    sent
}
