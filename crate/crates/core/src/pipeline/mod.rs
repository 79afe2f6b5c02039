//! The four-step see-through procedure: capture, image → sentence,
//! sentence → image, present.

pub mod augment;
pub mod backend;
pub mod caption;
pub mod clock;
pub mod config;
pub mod cycle;
pub mod session_log;
pub mod source;

pub use augment::{augment_caption, AugmentContext, AugmenterKind, Region, TemporalHint};
pub use backend::{BackendError, Captioner, Generator, LengthHint, ProceduralGenerator, TemplateCaptioner};
pub use caption::{adapt_image_to_text, Caption, CaptionError};
pub use clock::{Clock, MonotonicClock, SteppedClock};
pub use config::{ConfigError, PipelineConfig, RunMode, SeedPolicy};
pub use cycle::{adapt_text_to_image, run_cycle, CycleError, GeneratedView, Stage, TransformRecord};
pub use session_log::{LogEntry, SessionLog};
pub use source::{CaptureError, Frame, FrameSource, SourceKind, SourceSpec};
