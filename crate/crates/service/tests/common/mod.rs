#![allow(dead_code)]

use std::path::Path;
use std::sync::mpsc::{Receiver, Sender};
use std::sync::{mpsc, Arc};

use image::{Rgb, RgbImage};
use seethrough::hub::{EventBody, Hub, SessionEvent, Subscription};
use seethrough::live::{start_live, Backends, LiveHandle, LiveOptions};
use seethrough_core::pipeline::source::DirectorySource;
use seethrough_core::pipeline::{
    CaptureError, Clock, Frame, FrameSource, PipelineConfig, ProceduralGenerator, SourceKind, SteppedClock, TemplateCaptioner,
};

pub fn synthetic_image(i: u32, side: u32) -> RgbImage {
    RgbImage::from_fn(side, side, |x, y| {
        Rgb([
            ((x * (3 + i % 5) + i * 37) % 256) as u8,
            ((y * (2 + i % 3) + i * 71) % 256) as u8,
            (((x ^ y) + i * 13) % 256) as u8,
        ])
    })
}

pub fn write_images(dir: &Path, n: u32) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        synthetic_image(i, 48).save(dir.join(format!("img_{i:03}.png"))).unwrap();
    }
}

/// Live defaults with a small output so the tests stay quick.
pub fn small_live_config() -> PipelineConfig {
    PipelineConfig { live_resolution: 64, ..PipelineConfig::live() }
}

pub fn stub_backends() -> Backends {
    Backends { captioner: Arc::new(TemplateCaptioner), generator: Arc::new(ProceduralGenerator) }
}

pub fn stepped_clock() -> Arc<dyn Clock> {
    Arc::new(SteppedClock::new(0.01))
}

pub fn dir_source(dir: &Path, clock: Arc<dyn Clock>) -> Box<dyn FrameSource> {
    Box::new(DirectorySource::open(dir, clock).unwrap())
}

pub fn start(source: Box<dyn FrameSource>, backends: Backends, config: PipelineConfig, record: Option<&Path>, hub: Arc<Hub>) -> LiveHandle {
    start_live(
        source,
        backends,
        LiveOptions { config, max_retries: 0, record: record.map(Path::to_path_buf) },
        hub,
        stepped_clock(),
    )
    .unwrap()
}

/// Everything a subscription receives until the hub closes.
pub fn drain(sub: &Subscription) -> Vec<Arc<SessionEvent>> {
    futures::executor::block_on(async {
        let mut out = Vec::new();
        while let Some(e) = sub.recv().await {
            out.push(e);
        }
        out
    })
}

pub fn transforms(events: &[Arc<SessionEvent>]) -> Vec<Arc<SessionEvent>> {
    events.iter().filter(|e| e.is_transform()).cloned().collect()
}

/// Hands out one frame per permit, then reports exhaustion once `total`
/// frames are out or the permit sender is dropped.
pub struct GatedSource {
    permits: Receiver<()>,
    next: u64,
    total: u64,
}

impl GatedSource {
    pub fn new(total: u64) -> (Self, Sender<()>) {
        let (tx, rx) = mpsc::channel();
        (GatedSource { permits: rx, next: 0, total }, tx)
    }
}

impl FrameSource for GatedSource {
    fn kind(&self) -> SourceKind {
        SourceKind::ImageDirectory
    }

    fn capture_next(&mut self) -> Result<Frame, CaptureError> {
        if self.next >= self.total || self.permits.recv().is_err() {
            return Err(CaptureError::SourceExhausted);
        }
        let id = self.next;
        self.next += 1;
        Ok(Frame {
            frame_id: id,
            captured_at: id as f64 * 0.1,
            image: Arc::new(synthetic_image(id as u32, 48)),
            source_kind: SourceKind::ImageDirectory,
        })
    }
}

pub fn transform_steps(event: &SessionEvent) -> Option<u32> {
    match &event.body {
        EventBody::Transform { message, .. } => Some(message.inference_steps),
        _ => None,
    }
}

/// Blocks until the next transform arrives, returning it with anything
/// received before it.
pub fn until_transform(sub: &Subscription) -> Vec<Arc<SessionEvent>> {
    futures::executor::block_on(async {
        let mut out = Vec::new();
        while let Some(e) = sub.recv().await {
            let done = e.is_transform();
            out.push(e);
            if done {
                break;
            }
        }
        out
    })
}
