use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::augment::AugmenterKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "seed")]
pub enum SeedPolicy {
    /// The same seed for every frame.
    Fixed(u64),
    /// The frame id is the seed.
    PerFrame,
    /// A fresh seed per cycle; the drawn seed is still recorded.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Live,
    Study,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub min_words: usize,
    pub max_words: usize,
    /// Optional character bound, applied in addition to the word bound.
    #[serde(default)]
    pub min_chars: Option<usize>,
    #[serde(default)]
    pub max_chars: Option<usize>,
    pub inference_steps: u32,
    pub live_resolution: u32,
    pub study_resolution: u32,
    pub mode: RunMode,
    pub seed_policy: SeedPolicy,
    /// Seconds. Advisory only: cycles over budget are logged, never cut short.
    pub latency_budget: f64,
    #[serde(default)]
    pub augmenters: Vec<AugmenterKind>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("word bounds must satisfy 0 < min_words <= max_words (got {min}..{max})")]
    WordBounds { min: usize, max: usize },
    #[error("character bounds must satisfy 0 < min_chars <= max_chars (got {min:?}..{max:?})")]
    CharBounds { min: Option<usize>, max: Option<usize> },
    #[error("inference_steps must be at least 1")]
    Steps,
    #[error("resolution must be > 0 (got {0})")]
    Resolution(u32),
    #[error("latency budget must be a positive number of seconds")]
    Budget,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::live()
    }
}

impl PipelineConfig {
    /// Live defaults: 20–40 words, 4 steps, 640×640, seed per frame, ~1 s budget.
    pub fn live() -> Self {
        PipelineConfig {
            min_words: 20,
            max_words: 40,
            min_chars: None,
            max_chars: None,
            inference_steps: 4,
            live_resolution: 640,
            study_resolution: 256,
            mode: RunMode::Live,
            seed_policy: SeedPolicy::PerFrame,
            latency_budget: 1.0,
            augmenters: Vec::new(),
        }
    }

    /// Study defaults: as live, but 256×256 output and a fixed seed.
    pub fn study(seed: u64) -> Self {
        PipelineConfig {
            mode: RunMode::Study,
            seed_policy: SeedPolicy::Fixed(seed),
            ..PipelineConfig::live()
        }
    }

    /// Side length of generated images in the current mode.
    pub fn output_resolution(&self) -> u32 {
        match self.mode {
            RunMode::Live => self.live_resolution,
            RunMode::Study => self.study_resolution,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.min_words == 0 || self.min_words > self.max_words {
            return Err(ConfigError::WordBounds {
                min: self.min_words,
                max: self.max_words,
            });
        }
        let chars_ok = match (self.min_chars, self.max_chars) {
            (Some(0), _) | (_, Some(0)) => false,
            (Some(lo), Some(hi)) => lo <= hi,
            _ => true,
        };
        if !chars_ok {
            return Err(ConfigError::CharBounds {
                min: self.min_chars,
                max: self.max_chars,
            });
        }
        if self.inference_steps == 0 {
            return Err(ConfigError::Steps);
        }
        for r in [self.live_resolution, self.study_resolution] {
            if r == 0 {
                return Err(ConfigError::Resolution(r));
            }
        }
        if !(self.latency_budget.is_finite() && self.latency_budget > 0.0) {
            return Err(ConfigError::Budget);
        }
        Ok(())
    }
}
