//! One see-through cycle: frame → sentence → (augmented sentence) → image.

use std::fmt;
use std::sync::Arc;

use image::RgbImage;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::augment::{augment_caption, AugmentContext, AugmenterKind};
use super::backend::{BackendError, Captioner, Generator};
use super::caption::{adapt_image_to_text, enforce_bounds, word_count, Caption, CaptionError};
use super::clock::Clock;
use super::config::{PipelineConfig, SeedPolicy};
use super::source::Frame;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedView {
    pub image: Arc<RgbImage>,
    /// The exact prompt given to the generator.
    pub caption_text: String,
    pub seed: u64,
    pub inference_steps: u32,
    /// Seconds.
    pub generation_latency: f64,
}

/// Everything the outer display shows for one cycle. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformRecord {
    pub frame: Frame,
    pub caption: Caption,
    pub generated: GeneratedView,
    /// Age of the frame when the cycle picked it up, seconds.
    pub capture_latency: f64,
    /// Caption + augmentation + generation, seconds.
    pub total_latency: f64,
    pub augmenters_applied: Vec<AugmenterKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Caption,
    Augmentation,
    Generation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Caption => "caption",
            Stage::Augmentation => "augmentation",
            Stage::Generation => "generation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerationError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("generator returned {got_w}x{got_h}, expected {want}x{want}")]
    WrongResolution { got_w: u32, got_h: u32, want: u32 },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{stage} stage failed: {source}")]
pub struct CycleError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StageError {
    #[error(transparent)]
    Caption(#[from] CaptionError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
}

impl CycleError {
    fn at(stage: Stage, source: impl Into<StageError>) -> Self {
        CycleError { stage, source: source.into() }
    }

    /// True when the failure came from a backend rather than a constraint.
    pub fn is_backend_failure(&self) -> bool {
        matches!(
            self.source,
            StageError::Caption(CaptionError::Backend(_)) | StageError::Generation(GenerationError::Backend(_))
        )
    }
}

pub fn resolve_seed(policy: SeedPolicy, frame_id: u64) -> u64 {
    match policy {
        SeedPolicy::Fixed(seed) => seed,
        SeedPolicy::PerFrame => frame_id,
        SeedPolicy::Random => rand::thread_rng().gen(),
    }
}

/// Sentence → image at the configured output resolution.
pub fn adapt_text_to_image(
    caption_text: &str,
    seed: u64,
    config: &PipelineConfig,
    generator: &dyn Generator,
    clock: &dyn Clock,
) -> Result<GeneratedView, GenerationError> {
    if caption_text.trim().is_empty() {
        return Err(GenerationError::EmptyPrompt);
    }
    let want = config.output_resolution();
    let started = clock.now();
    let image = generator.render(caption_text, config.inference_steps, seed, want)?;
    let generation_latency = (clock.now() - started).max(0.0);
    if image.dimensions() != (want, want) {
        return Err(GenerationError::WrongResolution {
            got_w: image.width(),
            got_h: image.height(),
            want,
        });
    }
    Ok(GeneratedView {
        image: Arc::new(image),
        caption_text: caption_text.to_string(),
        seed,
        inference_steps: config.inference_steps,
        generation_latency,
    })
}

/// Runs steps 2 and 3 on a captured frame. No partial record is produced on
/// failure; the error names the stage.
pub fn run_cycle(
    frame: &Frame,
    config: &PipelineConfig,
    captioner: &dyn Captioner,
    generator: &dyn Generator,
    context: &AugmentContext,
    clock: &dyn Clock,
) -> Result<TransformRecord, CycleError> {
    let started = clock.now();
    let capture_latency = (started - frame.captured_at).max(0.0);

    let caption = adapt_image_to_text(&frame.image, frame.frame_id, config, captioner, clock)
        .map_err(|e| CycleError::at(Stage::Caption, e))?;

    let (caption, augmenters_applied) = if config.augmenters.is_empty() {
        (caption, Vec::new())
    } else {
        let (mut augmented, applied) = augment_caption(&caption, &config.augmenters, context, config);
        let (text, cut) =
            enforce_bounds(&augmented.text, config).map_err(|e| CycleError::at(Stage::Augmentation, e))?;
        augmented.word_count = word_count(&text);
        augmented.text = text;
        augmented.truncated |= cut;
        (augmented, applied)
    };

    let seed = resolve_seed(config.seed_policy, frame.frame_id);
    let generated = adapt_text_to_image(&caption.text, seed, config, generator, clock)
        .map_err(|e| CycleError::at(Stage::Generation, e))?;

    let total_latency = (clock.now() - started).max(0.0);
    if total_latency > config.latency_budget {
        log::debug!(
            "frame {} took {:.3}s (budget {:.3}s)",
            frame.frame_id,
            total_latency,
            config.latency_budget
        );
    }
    Ok(TransformRecord {
        frame: frame.clone(),
        caption,
        generated,
        capture_latency,
        total_latency,
        augmenters_applied,
    })
}
