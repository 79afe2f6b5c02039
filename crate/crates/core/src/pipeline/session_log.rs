//! Append-only session log: `records.jsonl` with one JSON object per
//! transform record, images stored as PNG files under `images/`.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::augment::AugmenterKind;
use super::cycle::TransformRecord;
use crate::raster;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const IMAGES_DIR: &str = "images";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latencies {
    pub capture: f64,
    pub caption: f64,
    pub generation: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePaths {
    pub original: String,
    pub generated: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub frame_id: u64,
    pub captured_at: f64,
    pub caption: String,
    pub word_count: usize,
    pub truncated: bool,
    pub augmenters: Vec<AugmenterKind>,
    pub seed: u64,
    pub steps: u32,
    pub latencies: Latencies,
    /// Relative to the session directory.
    pub images: ImagePaths,
}

impl LogEntry {
    /// The entry a session log writes for `record`.
    pub fn of(record: &TransformRecord) -> LogEntry {
        let id = record.frame.frame_id;
        LogEntry {
            frame_id: id,
            captured_at: record.frame.captured_at,
            caption: record.caption.text.clone(),
            word_count: record.caption.word_count,
            truncated: record.caption.truncated,
            augmenters: record.augmenters_applied.clone(),
            seed: record.generated.seed,
            steps: record.generated.inference_steps,
            latencies: LogEntry::latencies_of(record),
            images: ImagePaths {
                original: format!("{IMAGES_DIR}/{id:08}_original.png"),
                generated: format!("{IMAGES_DIR}/{id:08}_generated.png"),
            },
        }
    }

    pub fn latencies_of(record: &TransformRecord) -> Latencies {
        Latencies {
            capture: record.capture_latency,
            caption: record.caption.caption_latency,
            generation: record.generated.generation_latency,
            total: record.total_latency,
        }
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("session log I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed log line {line} in {path}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LogError + '_ {
    move |source| LogError::Io { path: path.to_path_buf(), source }
}

/// What one append wrote, for callers that index the session.
#[derive(Debug, Clone, PartialEq)]
pub struct Appended {
    pub entry: LogEntry,
    pub line: String,
    pub original_png: Vec<u8>,
    pub generated_png: Vec<u8>,
}

pub struct SessionLog {
    dir: PathBuf,
    records: File,
}

impl SessionLog {
    /// Opens (or creates) a log in `dir`; existing records are kept.
    pub fn open(dir: &Path) -> Result<Self, LogError> {
        let images = dir.join(IMAGES_DIR);
        fs::create_dir_all(&images).map_err(io_err(&images))?;
        let path = dir.join(RECORDS_FILE);
        let records = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(SessionLog { dir: dir.to_path_buf(), records })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&mut self, record: &TransformRecord) -> Result<Appended, LogError> {
        let entry = LogEntry::of(record);
        let original_png = raster::encode_png(&record.frame.image);
        let generated_png = raster::encode_png(&record.generated.image);
        for (rel, bytes) in [(&entry.images.original, &original_png), (&entry.images.generated, &generated_png)] {
            let path = self.dir.join(rel);
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        let line = serde_json::to_string(&entry).expect("log entries always serialize");
        let path = self.dir.join(RECORDS_FILE);
        writeln!(self.records, "{line}").map_err(io_err(&path))?;
        self.records.flush().map_err(io_err(&path))?;
        Ok(Appended {
            entry,
            line,
            original_png,
            generated_png,
        })
    }
}

pub fn read_log(dir: &Path) -> Result<Vec<LogEntry>, LogError> {
    let path = dir.join(RECORDS_FILE);
    let file = File::open(&path).map_err(io_err(&path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| LogError::Malformed {
            path: path.clone(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
