//! The live loop: capture → transform → emit, one cycle at a time.
//!
//! Config patches and stop requests travel through a single control queue
//! and are only looked at between cycles, so a cycle always runs to
//! completion under one config.

use std::path::PathBuf;
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;

use seethrough_core::pipeline::session_log::LogEntry;
use seethrough_core::pipeline::{
    run_cycle, AugmentContext, CaptureError, Captioner, Clock, FrameSource, Generator, PipelineConfig, TransformRecord,
};
use seethrough_core::raster;

use crate::hub::{EventBody, Hub};
use crate::patch::{LiveConfigPatch, PatchError};
use crate::protocol::{StatusLevel, TransformMessage};
use crate::record::Recorder;

/// How many earlier captions the augmenters may look at.
const CAPTION_HISTORY: usize = 4;

pub struct LiveOptions {
    pub config: PipelineConfig,
    /// Extra attempts for a frame whose cycle failed in a backend.
    pub max_retries: u32,
    pub record: Option<PathBuf>,
}

enum Control {
    Patch(LiveConfigPatch, Sender<Result<PipelineConfig, PatchError>>),
    Stop,
}

/// Cloneable handle for submitting patches and stop requests.
#[derive(Clone)]
pub struct Controller {
    tx: Sender<Control>,
}

impl Controller {
    /// Queues a patch and waits for the loop to apply or reject it at the
    /// next cycle boundary.
    pub fn apply_patch(&self, patch: LiveConfigPatch) -> Result<PipelineConfig, PatchError> {
        self.submit_patch(patch).wait()
    }

    /// Queues a patch without waiting. It is in the queue when this returns.
    pub fn submit_patch(&self, patch: LiveConfigPatch) -> PendingPatch {
        let (tx, rx) = mpsc::channel();
        let queued = self.tx.send(Control::Patch(patch, tx)).is_ok();
        PendingPatch { rx: queued.then_some(rx) }
    }

    /// Asks the loop to stop after the cycle in progress.
    pub fn stop(&self) {
        let _ = self.tx.send(Control::Stop);
    }
}

pub struct PendingPatch {
    rx: Option<Receiver<Result<PipelineConfig, PatchError>>>,
}

impl PendingPatch {
    pub fn wait(self) -> Result<PipelineConfig, PatchError> {
        match self.rx {
            Some(rx) => rx.recv().map_err(|_| PatchError::SessionClosed)?,
            None => Err(PatchError::SessionClosed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    SourceExhausted,
    SourceFailed(String),
    Requested,
    RecordingFailed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiveSummary {
    pub transforms: u64,
    pub skipped_frames: u64,
    pub stop_reason: StopReason,
    pub final_config: PipelineConfig,
}

pub struct LiveHandle {
    controller: Controller,
    thread: Option<JoinHandle<LiveSummary>>,
    hub: Arc<Hub>,
}

impl LiveHandle {
    pub fn controller(&self) -> Controller {
        self.controller.clone()
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    pub fn stop(&self) {
        self.controller.stop();
    }

    /// Waits for the loop to end.
    pub fn join(mut self) -> LiveSummary {
        self.thread.take().expect("joined once").join().expect("live loop panicked")
    }
}

pub struct Backends {
    pub captioner: Arc<dyn Captioner>,
    pub generator: Arc<dyn Generator>,
}

/// Starts the loop on its own thread. Events go to `hub`, which is closed
/// when the loop ends.
pub fn start_live(
    source: Box<dyn FrameSource>,
    backends: Backends,
    options: LiveOptions,
    hub: Arc<Hub>,
    clock: Arc<dyn Clock>,
) -> Result<LiveHandle, crate::Error> {
    options.config.validate().map_err(PatchError::from)?;
    let recorder = match &options.record {
        Some(dir) => Some(Recorder::create(dir)?),
        None => None,
    };
    let (tx, rx) = mpsc::channel();
    let loop_hub = hub.clone();
    let thread = std::thread::Builder::new()
        .name("live-loop".into())
        .spawn(move || run_loop(source, backends, options, recorder, &loop_hub, clock.as_ref(), rx))
        .expect("spawn live loop");
    Ok(LiveHandle { controller: Controller { tx }, thread: Some(thread), hub })
}

fn emit_transform(hub: &Hub, recorder: &mut Option<Recorder>, record: &TransformRecord) -> Result<(), String> {
    let body = |seq: u64, entry: &LogEntry, original: Vec<u8>, generated: Vec<u8>| EventBody::Transform {
        message: TransformMessage::from_entry(seq, entry),
        original_png: Arc::new(original),
        generated_png: Arc::new(generated),
    };
    // this loop is the only publisher, so the peeked seq is the one
    // `publish` stamps and the index can record it up front
    let seq = hub.peek_next_seq();
    let published = match recorder {
        Some(rec) => {
            let appended = rec.append(seq, record).map_err(|e| e.to_string())?;
            hub.publish(body(seq, &appended.entry, appended.original_png, appended.generated_png))
        }
        None => hub.publish(body(
            seq,
            &LogEntry::of(record),
            raster::encode_png(&record.frame.image),
            raster::encode_png(&record.generated.image),
        )),
    };
    debug_assert_eq!(published, seq);
    Ok(())
}

fn run_loop(
    mut source: Box<dyn FrameSource>,
    backends: Backends,
    options: LiveOptions,
    mut recorder: Option<Recorder>,
    hub: &Hub,
    clock: &dyn Clock,
    control: Receiver<Control>,
) -> LiveSummary {
    let mut config = options.config;
    let mut context = AugmentContext::default();
    let mut transforms = 0;
    let mut skipped_frames = 0;
    let stop_reason = 'outer: loop {
        // cycle boundary: apply everything queued so far
        while let Ok(msg) = control.try_recv() {
            match msg {
                Control::Stop => break 'outer StopReason::Requested,
                Control::Patch(patch, reply) => {
                    let result = patch.apply_to(&config);
                    if let Ok(next) = &result {
                        config = next.clone();
                        hub.publish(EventBody::ConfigChange { config: config.clone() });
                    }
                    let _ = reply.send(result);
                }
            }
        }
        let frame = match source.capture_next() {
            Ok(f) => f,
            Err(CaptureError::SourceExhausted) => break StopReason::SourceExhausted,
            Err(CaptureError::SourceUnavailable(msg)) => {
                hub.status(StatusLevel::Error, format!("source unavailable: {msg}"));
                break StopReason::SourceFailed(msg);
            }
        };
        let mut attempt = 0;
        let outcome = loop {
            match run_cycle(&frame, &config, backends.captioner.as_ref(), backends.generator.as_ref(), &context, clock) {
                Err(e) if e.is_backend_failure() && attempt < options.max_retries => {
                    attempt += 1;
                    hub.status(StatusLevel::Warning, format!("frame {}: {e}; retry {attempt}/{}", frame.frame_id, options.max_retries));
                }
                other => break other,
            }
        };
        match outcome {
            Ok(record) => {
                if let Err(e) = emit_transform(hub, &mut recorder, &record) {
                    hub.status(StatusLevel::Error, format!("recording failed: {e}"));
                    break StopReason::RecordingFailed(e);
                }
                transforms += 1;
                context.previous_captions.push(record.caption.text.clone());
                if context.previous_captions.len() > CAPTION_HISTORY {
                    context.previous_captions.remove(0);
                }
            }
            Err(e) => {
                skipped_frames += 1;
                hub.status(StatusLevel::Warning, format!("frame {} skipped: {e}", frame.frame_id));
            }
        }
    };
    let note = match &stop_reason {
        StopReason::SourceExhausted => "stopped: source exhausted".to_string(),
        StopReason::Requested => "stopped on request".to_string(),
        StopReason::SourceFailed(m) | StopReason::RecordingFailed(m) => format!("stopped: {m}"),
    };
    hub.status(StatusLevel::Info, note);
    hub.close();
    // answer anything still queued so no caller blocks forever
    while let Ok(msg) = control.try_recv() {
        if let Control::Patch(_, reply) = msg {
            let _ = reply.send(Err(PatchError::SessionClosed));
        }
    }
    LiveSummary { transforms, skipped_frames, stop_reason, final_config: config }
}
