use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::par::{self, Parallelism};
use crate::pipeline::cycle::resolve_seed;
use crate::pipeline::{adapt_image_to_text, adapt_text_to_image, Caption, Captioner, Generator, MonotonicClock, PipelineConfig, Stage};

use super::dataset::StudyImage;

/// One item's trip: input → caption_pre → output → caption_post.
#[derive(Debug, Clone)]
pub struct RoundTrip {
    pub item_id: String,
    pub input: Arc<RgbImage>,
    pub caption_pre: Caption,
    pub output: Arc<RgbImage>,
    pub caption_post: Caption,
    pub seed: u64,
    pub inference_steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedItem {
    pub item_id: String,
    pub stage: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct RoundTripRun {
    pub items: Vec<RoundTrip>,
    pub dropped: Vec<DroppedItem>,
}

impl RoundTripRun {
    pub fn drop_count(&self) -> usize {
        self.dropped.len()
    }
}

fn one(index: usize, item: &StudyImage, config: &PipelineConfig, captioner: &dyn Captioner, generator: &dyn Generator) -> Result<RoundTrip, DroppedItem> {
    let clock = MonotonicClock::new();
    let frame_id = index as u64;
    let dropped = |stage: Stage, reason: String| DroppedItem {
        item_id: item.item_id.clone(),
        stage: stage.to_string(),
        reason,
    };
    let pre = adapt_image_to_text(&item.image, frame_id, config, captioner, &clock)
        .map_err(|e| dropped(Stage::Caption, e.to_string()))?;
    let seed = resolve_seed(config.seed_policy, frame_id);
    let view = adapt_text_to_image(&pre.text, seed, config, generator, &clock)
        .map_err(|e| dropped(Stage::Generation, e.to_string()))?;
    let post = adapt_image_to_text(&view.image, frame_id, config, captioner, &clock)
        .map_err(|e| dropped(Stage::Caption, format!("post caption: {e}")))?;
    Ok(RoundTrip {
        item_id: item.item_id.clone(),
        input: Arc::new(item.image.clone()),
        caption_pre: pre,
        output: view.image,
        caption_post: post,
        seed,
        inference_steps: view.inference_steps,
    })
}

/// Captions each image, generates from that caption, then captions the
/// output with the same captioner and constraints. Failed items are dropped
/// and listed; survivors keep input order.
pub fn run_roundtrip(
    images: &[StudyImage],
    config: &PipelineConfig,
    captioner: &dyn Captioner,
    generator: &dyn Generator,
    mode: Parallelism,
) -> RoundTripRun {
    let indexed: Vec<(usize, &StudyImage)> = images.iter().enumerate().collect();
    let results = par::map(&indexed, mode, |(i, item)| one(*i, item, config, captioner, generator));
    let mut run = RoundTripRun::default();
    for r in results {
        match r {
            Ok(trip) => run.items.push(trip),
            Err(d) => {
                log::warn!("dropping {} at {} stage: {}", d.item_id, d.stage, d.reason);
                run.dropped.push(d);
            }
        }
    }
    run
}
