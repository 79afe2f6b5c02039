//! Frame sources. Every source hands out the newest available frame; stale
//! frames are overwritten in a single slot, never queued.

use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::clock::Clock;
use crate::raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Camera,
    VideoFile,
    ImageDirectory,
}

/// A timestamped captured raster. Cheap to clone; the pixels are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_id: u64,
    /// Seconds on the session clock.
    pub captured_at: f64,
    pub image: Arc<RgbImage>,
    pub source_kind: SourceKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CaptureError {
    #[error("source exhausted")]
    SourceExhausted,
    #[error("source unavailable: {0}")]
    SourceUnavailable(String),
}

pub trait FrameSource: Send {
    fn kind(&self) -> SourceKind;
    /// Newest available frame; blocks until one exists or the source ends.
    fn capture_next(&mut self) -> Result<Frame, CaptureError>;
}

/// `camera:N`, `video:PATH` or `dir:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceSpec {
    Camera(u32),
    Video(PathBuf),
    Directory(PathBuf),
}

impl FromStr for SourceSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("source `{s}` must look like camera:N, video:PATH or dir:PATH"))?;
        match kind {
            "camera" => rest
                .parse()
                .map(SourceSpec::Camera)
                .map_err(|_| format!("bad camera index `{rest}`")),
            "video" if !rest.is_empty() => Ok(SourceSpec::Video(rest.into())),
            "dir" if !rest.is_empty() => Ok(SourceSpec::Directory(rest.into())),
            _ => Err(format!("unsupported source `{s}`")),
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Camera(i) => write!(f, "camera:{i}"),
            SourceSpec::Video(p) => write!(f, "video:{}", p.display()),
            SourceSpec::Directory(p) => write!(f, "dir:{}", p.display()),
        }
    }
}

/// Opens a source. Camera and video frames are decoded by an `ffmpeg` child
/// process scaled to `capture_size`×`capture_size`.
pub fn open_source(
    spec: &SourceSpec,
    clock: Arc<dyn Clock>,
    capture_size: u32,
) -> Result<Box<dyn FrameSource>, CaptureError> {
    match spec {
        SourceSpec::Directory(dir) => Ok(Box::new(DirectorySource::open(dir, clock)?)),
        SourceSpec::Camera(index) => {
            let device = format!("/dev/video{index}");
            let args = ["-f", "v4l2", "-i", device.as_str()];
            Ok(Box::new(spawn_ffmpeg(&args, SourceKind::Camera, clock, capture_size)?))
        }
        SourceSpec::Video(path) => {
            let path = path.to_string_lossy();
            let args = ["-re", "-i", path.as_ref()];
            Ok(Box::new(spawn_ffmpeg(&args, SourceKind::VideoFile, clock, capture_size)?))
        }
    }
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files with a known raster extension, in lexicographic file-name order.
pub fn list_images(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && is_image_path(p))
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Reads files in name order; unreadable files are skipped with a warning.
pub struct DirectorySource {
    files: std::vec::IntoIter<PathBuf>,
    next_id: u64,
    clock: Arc<dyn Clock>,
}

impl DirectorySource {
    pub fn open(dir: &Path, clock: Arc<dyn Clock>) -> Result<Self, CaptureError> {
        let files = list_images(dir).map_err(|e| CaptureError::SourceUnavailable(format!("{}: {e}", dir.display())))?;
        Ok(DirectorySource {
            files: files.into_iter(),
            next_id: 0,
            clock,
        })
    }
}

impl FrameSource for DirectorySource {
    fn kind(&self) -> SourceKind {
        SourceKind::ImageDirectory
    }

    fn capture_next(&mut self) -> Result<Frame, CaptureError> {
        for path in self.files.by_ref() {
            match raster::open_rgb(&path) {
                Ok(image) if image.width() > 0 && image.height() > 0 => {
                    let frame = Frame {
                        frame_id: self.next_id,
                        captured_at: self.clock.now(),
                        image: Arc::new(image),
                        source_kind: SourceKind::ImageDirectory,
                    };
                    self.next_id += 1;
                    return Ok(frame);
                }
                Ok(_) => log::warn!("skipping empty image {}", path.display()),
                Err(e) => log::warn!("skipping unreadable image {}: {e}", path.display()),
            }
        }
        Err(CaptureError::SourceExhausted)
    }
}

#[derive(Debug)]
struct SlotState<T> {
    value: Option<T>,
    closed: Option<Option<String>>,
}

/// Single-slot mailbox: `put` overwrites, `take` returns the newest value.
#[derive(Debug)]
pub struct LatestSlot<T> {
    state: Mutex<SlotState<T>>,
    ready: Condvar,
}

impl<T> Default for LatestSlot<T> {
    fn default() -> Self {
        LatestSlot {
            state: Mutex::new(SlotState { value: None, closed: None }),
            ready: Condvar::new(),
        }
    }
}

impl<T> LatestSlot<T> {
    /// Stores `value`; returns the value it displaced, if any.
    pub fn put(&self, value: T) -> Option<T> {
        let mut s = self.state.lock().unwrap();
        let old = s.value.replace(value);
        self.ready.notify_all();
        old
    }

    /// Marks the producer as finished, with an error message on failure.
    pub fn close(&self, error: Option<String>) {
        let mut s = self.state.lock().unwrap();
        s.closed.get_or_insert(error);
        self.ready.notify_all();
    }

    /// Blocks for the newest value. `Err(None)` means closed cleanly,
    /// `Err(Some(msg))` closed with an error.
    pub fn take(&self) -> Result<T, Option<String>> {
        let mut s = self.state.lock().unwrap();
        loop {
            if let Some(v) = s.value.take() {
                return Ok(v);
            }
            if let Some(closed) = &s.closed {
                return Err(closed.clone());
            }
            s = self.ready.wait(s).unwrap();
        }
    }
}

/// Producer result: `Ok(Some)` a frame, `Ok(None)` end of stream, `Err` failure.
pub type ProduceResult = Result<Option<RgbImage>, String>;

/// Runs a producer on its own thread; the consumer sees only the latest frame.
pub struct ThreadedSource {
    kind: SourceKind,
    slot: Arc<LatestSlot<Frame>>,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
    child: Option<Child>,
}

impl ThreadedSource {
    pub fn spawn<P>(kind: SourceKind, clock: Arc<dyn Clock>, mut produce: P) -> Self
    where
        P: FnMut() -> ProduceResult + Send + 'static,
    {
        let slot = Arc::new(LatestSlot::default());
        let stop = Arc::new(AtomicBool::new(false));
        let worker = {
            let slot = Arc::clone(&slot);
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                let mut next_id = 0u64;
                while !stop.load(Ordering::Relaxed) {
                    match produce() {
                        Ok(Some(image)) => {
                            slot.put(Frame {
                                frame_id: next_id,
                                captured_at: clock.now(),
                                image: Arc::new(image),
                                source_kind: kind,
                            });
                            next_id += 1;
                        }
                        Ok(None) => break,
                        Err(e) => {
                            slot.close(Some(e));
                            return;
                        }
                    }
                }
                slot.close(None);
            })
        };
        ThreadedSource {
            kind,
            slot,
            stop,
            worker: Some(worker),
            child: None,
        }
    }

    /// Producer that emits `frames` at a fixed rate, for tests and demos.
    pub fn paced<F>(kind: SourceKind, clock: Arc<dyn Clock>, fps: f64, limit: Option<u64>, mut frame: F) -> Self
    where
        F: FnMut(u64) -> RgbImage + Send + 'static,
    {
        let period = Duration::from_secs_f64(1.0 / fps);
        let mut n = 0u64;
        ThreadedSource::spawn(kind, clock, move || {
            if limit.is_some_and(|l| n >= l) {
                return Ok(None);
            }
            std::thread::sleep(period);
            let img = frame(n);
            n += 1;
            Ok(Some(img))
        })
    }
}

impl FrameSource for ThreadedSource {
    fn kind(&self) -> SourceKind {
        self.kind
    }

    fn capture_next(&mut self) -> Result<Frame, CaptureError> {
        self.slot.take().map_err(|closed| match closed {
            None => CaptureError::SourceExhausted,
            Some(msg) => CaptureError::SourceUnavailable(msg),
        })
    }
}

impl Drop for ThreadedSource {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
        if let Some(w) = self.worker.take() {
            // the producer may be blocked on a read; do not wait for it
            drop(w);
        }
    }
}

/// Producer over a stream of packed RGB24 frames of fixed size.
pub fn raw_rgb_producer<R: Read + Send + 'static>(mut reader: R, width: u32, height: u32) -> impl FnMut() -> ProduceResult + Send {
    let frame_len = width as usize * height as usize * 3;
    move || {
        let mut buf = vec![0u8; frame_len];
        let mut filled = 0;
        while filled < frame_len {
            match reader.read(&mut buf[filled..]) {
                Ok(0) if filled == 0 => return Ok(None),
                Ok(0) => return Err(format!("truncated frame ({filled} of {frame_len} bytes)")),
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.to_string()),
            }
        }
        Ok(RgbImage::from_raw(width, height, buf))
    }
}

fn spawn_ffmpeg(
    input_args: &[&str],
    kind: SourceKind,
    clock: Arc<dyn Clock>,
    size: u32,
) -> Result<ThreadedSource, CaptureError> {
    let scale = format!(
        "scale={size}:{size}:force_original_aspect_ratio=increase,crop={size}:{size}"
    );
    let mut child = Command::new("ffmpeg")
        .args(["-loglevel", "error", "-nostdin"])
        .args(input_args)
        .args(["-vf", scale.as_str(), "-f", "rawvideo", "-pix_fmt", "rgb24", "-"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| CaptureError::SourceUnavailable(format!("cannot start ffmpeg: {e}")))?;
    let stdout = child
        .stdout
        .take()
        .ok_or_else(|| CaptureError::SourceUnavailable("ffmpeg stdout missing".into()))?;
    let mut source = ThreadedSource::spawn(kind, clock, raw_rgb_producer(stdout, size, size));
    source.child = Some(child);
    Ok(source)
}
