//! `live --config FILE`: one TOML document with optional `[pipeline]`,
//! `[backends]` and `[service]` tables.
//!
//! ```toml
//! [pipeline]            # overrides on top of the live defaults
//! min_words = 20
//! max_words = 40
//! inference_steps = 4
//! seed_policy = { kind = "per_frame" }
//! augmenters = ["personhood"]
//!
//! [backends]            # same keys as the study backends file
//! captioner = "stub"
//! generator = "stub"
//!
//! [service]
//! mailbox_capacity = 8
//! max_retries = 2
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use seethrough_core::pipeline::PipelineConfig;
use seethrough_core::study::BackendsConfig;

use crate::hub::DEFAULT_MAILBOX_CAPACITY;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSettings {
    #[serde(default = "default_capacity")]
    pub mailbox_capacity: usize,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_capacity() -> usize {
    DEFAULT_MAILBOX_CAPACITY
}
fn default_retries() -> u32 {
    2
}

impl Default for ServiceSettings {
    fn default() -> Self {
        ServiceSettings { mailbox_capacity: default_capacity(), max_retries: default_retries() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiveFile {
    pub pipeline: PipelineConfig,
    pub backends: BackendsConfig,
    pub service: ServiceSettings,
    /// Directory relative backend paths resolve against.
    pub base: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    #[serde(default)]
    pipeline: Option<toml::Table>,
    #[serde(default)]
    backends: Option<BackendsConfig>,
    #[serde(default)]
    service: Option<ServiceSettings>,
}

impl Default for LiveFile {
    fn default() -> Self {
        LiveFile {
            pipeline: PipelineConfig::live(),
            backends: BackendsConfig::default(),
            service: ServiceSettings::default(),
            base: PathBuf::from("."),
        }
    }
}

impl LiveFile {
    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        let raw: Raw = toml::from_str(text).map_err(|e| e.to_string())?;
        // overlay the given keys on the serialized live defaults
        let mut table = toml::Table::try_from(PipelineConfig::live()).map_err(|e| e.to_string())?;
        for (k, v) in raw.pipeline.unwrap_or_default() {
            if !table.contains_key(&k) && !["min_chars", "max_chars"].contains(&k.as_str()) {
                return Err(format!("unknown pipeline key `{k}`"));
            }
            table.insert(k, v);
        }
        let pipeline: PipelineConfig = table.try_into().map_err(|e: toml::de::Error| e.to_string())?;
        pipeline.validate().map_err(|e| e.to_string())?;
        Ok(LiveFile {
            pipeline,
            backends: raw.backends.unwrap_or_default(),
            service: raw.service.unwrap_or_default(),
            base: base.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}
