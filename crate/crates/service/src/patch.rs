use serde::{Deserialize, Serialize};
use seethrough_core::pipeline::{AugmenterKind, ConfigError, PipelineConfig, SeedPolicy};
use thiserror::Error;

/// Operator overrides applied between cycles. Absent fields keep their
/// current value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveConfigPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_words: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_words: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference_steps: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_policy: Option<SeedPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmenters: Option<Vec<AugmenterKind>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatchError {
    #[error("invalid patch: {0}")]
    InvalidPatch(#[from] ConfigError),
    #[error("session is not accepting patches")]
    SessionClosed,
}

impl LiveConfigPatch {
    /// The patched config, or the invariant it breaks. `base` is untouched.
    pub fn apply_to(&self, base: &PipelineConfig) -> Result<PipelineConfig, PatchError> {
        let mut next = base.clone();
        if let Some(v) = self.min_words {
            next.min_words = v;
        }
        if let Some(v) = self.max_words {
            next.max_words = v;
        }
        if let Some(v) = self.inference_steps {
            next.inference_steps = v;
        }
        if let Some(v) = self.seed_policy {
            next.seed_policy = v;
        }
        if let Some(v) = &self.augmenters {
            next.augmenters = v.clone();
        }
        next.validate()?;
        Ok(next)
    }
}
