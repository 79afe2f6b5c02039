//! Flat TOML document pinning the study backends.
//!
//! ```toml
//! captioner = "stub"            # or "remote:<model>"
//! generator = "stub"            # or "remote:<model>"
//! remote_url = "http://127.0.0.1:8765"
//! remote_timeout_secs = 120
//! embedding_use = "stub"        # "remote:<model>" or "none"
//! embedding_sbert = "stub"
//! lpips_conv = "stub"           # "remote:<net>" or "none"
//! lpips_transformer = "stub"
//! word_vectors = "stub"         # or a path to a text vector table
//! word_vectors_sha256 = "..."   # optional pin, checked on load
//! stop_words = "bundled"        # or a path, one word per line
//! bins = 8
//! ```
//!
//! Relative paths resolve against the config file's directory, then against
//! the directory named by `SEETHROUGH_CACHE_DIR` when set. `stub`
//! selects the deterministic in-crate backends; `none` disables a metric so
//! its report row is marked skipped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image_metrics::{FilterBankPerceptual, PerceptualBackend, DEFAULT_BINS};
use crate::pipeline::{Captioner, Generator, ProceduralGenerator, TemplateCaptioner};
use crate::remote::{RemoteCaptioner, RemoteClient, RemoteEmbedder, RemoteGenerator, RemotePerceptual};
use crate::score::MetricId;
use crate::text_metrics::{EmbeddingBackendId, HashEmbedder, SentenceEmbedder, StopWords, WordVectorError, WordVectors};

/// Fallback directory for downloaded backend assets (word vectors, lists).
pub const CACHE_DIR_ENV: &str = "SEETHROUGH_CACHE_DIR";

pub const STUB_WORD_VECTORS: &str = include_str!("../../data/stub_vectors.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsConfig {
    #[serde(default = "stub")]
    pub captioner: String,
    #[serde(default = "stub")]
    pub generator: String,
    #[serde(default)]
    pub remote_url: Option<String>,
    #[serde(default = "default_timeout")]
    pub remote_timeout_secs: u64,
    #[serde(default = "stub")]
    pub embedding_use: String,
    #[serde(default = "stub")]
    pub embedding_sbert: String,
    #[serde(default = "stub")]
    pub lpips_conv: String,
    #[serde(default = "stub")]
    pub lpips_transformer: String,
    #[serde(default = "stub")]
    pub word_vectors: String,
    #[serde(default)]
    pub word_vectors_sha256: Option<String>,
    #[serde(default = "bundled")]
    pub stop_words: String,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn stub() -> String {
    "stub".into()
}
fn bundled() -> String {
    "bundled".into()
}
fn default_timeout() -> u64 {
    120
}
fn default_bins() -> usize {
    DEFAULT_BINS
}

impl Default for BackendsConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty document takes every default")
    }
}

#[derive(Debug, Error)]
pub enum BackendsError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad backends config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{key}: {message}")]
    Invalid { key: &'static str, message: String },
    #[error(transparent)]
    WordVectors(#[from] WordVectorError),
}

/// A metric slot that may be switched off; `Err` carries the skip reason.
pub type Slot<T> = Result<Arc<T>, String>;

pub struct Backends {
    pub captioner: Arc<dyn Captioner>,
    pub generator: Arc<dyn Generator>,
    pub embedding_use: Slot<dyn SentenceEmbedder>,
    pub embedding_sbert: Slot<dyn SentenceEmbedder>,
    pub lpips_conv: Slot<dyn PerceptualBackend>,
    pub lpips_transformer: Slot<dyn PerceptualBackend>,
    pub word_vectors: Arc<WordVectors>,
    pub stop_words: Arc<StopWords>,
    pub bins: usize,
    /// Identity of every backend plus pinned checksums, for the report.
    pub snapshot: BTreeMap<String, String>,
}

enum Choice<'a> {
    Stub,
    None,
    Remote(&'a str),
}

fn choice<'a>(key: &'static str, value: &'a str) -> Result<Choice<'a>, BackendsError> {
    match value {
        "stub" => Ok(Choice::Stub),
        "none" => Ok(Choice::None),
        v => match v.strip_prefix("remote:") {
            Some(model) if !model.is_empty() => Ok(Choice::Remote(model)),
            _ => Err(BackendsError::Invalid {
                key,
                message: format!("expected stub, none or remote:<name>, got {v:?}"),
            }),
        },
    }
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let direct = base.join(rel);
    if direct.exists() || Path::new(rel).is_absolute() {
        return direct;
    }
    match std::env::var_os(CACHE_DIR_ENV) {
        Some(cache) if Path::new(&cache).join(rel).exists() => Path::new(&cache).join(rel),
        _ => direct,
    }
}

impl BackendsConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), BackendsError> {
        let text = std::fs::read_to_string(path).map_err(|source| BackendsError::Io { path: path.into(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((toml::from_str(&text)?, base))
    }

    fn client(&self) -> Result<RemoteClient, BackendsError> {
        let url = self.remote_url.as_deref().ok_or(BackendsError::Invalid {
            key: "remote_url",
            message: "required when any backend is remote".into(),
        })?;
        Ok(RemoteClient::new(url, Duration::from_secs(self.remote_timeout_secs)))
    }

    fn embedder(&self, key: &'static str, value: &str, id: EmbeddingBackendId) -> Result<Slot<dyn SentenceEmbedder>, BackendsError> {
        Ok(match choice(key, value)? {
            Choice::Stub => {
                // distinct dimensions keep the two stub slots from being identical
                let dim = if id == EmbeddingBackendId::SbertStyle { 384 } else { 256 };
                Ok(Arc::new(HashEmbedder { dim }) as Arc<dyn SentenceEmbedder>)
            }
            Choice::None => Err(format!("{key} = \"none\"")),
            Choice::Remote(model) => Ok(Arc::new(RemoteEmbedder {
                client: self.client()?,
                model: model.into(),
                backend_id: id,
            }) as Arc<dyn SentenceEmbedder>),
        })
    }

    fn perceptual(&self, key: &'static str, value: &str, metric: MetricId) -> Result<Slot<dyn PerceptualBackend>, BackendsError> {
        Ok(match choice(key, value)? {
            Choice::Stub => Ok(Arc::new(FilterBankPerceptual::for_metric(metric).expect("lpips metric")) as Arc<dyn PerceptualBackend>),
            Choice::None => Err(format!("{key} = \"none\"")),
            Choice::Remote(net) => Ok(Arc::new(RemotePerceptual {
                client: self.client()?,
                net: net.into(),
                metric,
            }) as Arc<dyn PerceptualBackend>),
        })
    }

    /// Instantiates every backend; `base` resolves relative paths.
    pub fn build(&self, base: &Path) -> Result<Backends, BackendsError> {
        if self.bins == 0 {
            return Err(BackendsError::Invalid { key: "bins", message: "must be positive".into() });
        }
        let captioner: Arc<dyn Captioner> = match choice("captioner", &self.captioner)? {
            Choice::Stub => Arc::new(TemplateCaptioner),
            Choice::Remote(model) => Arc::new(RemoteCaptioner { client: self.client()?, model: model.into() }),
            Choice::None => return Err(BackendsError::Invalid { key: "captioner", message: "cannot be none".into() }),
        };
        let generator: Arc<dyn Generator> = match choice("generator", &self.generator)? {
            Choice::Stub => Arc::new(ProceduralGenerator),
            Choice::Remote(model) => Arc::new(RemoteGenerator { client: self.client()?, model: model.into() }),
            Choice::None => return Err(BackendsError::Invalid { key: "generator", message: "cannot be none".into() }),
        };
        let word_vectors = if self.word_vectors == "stub" {
            let wv = WordVectors::parse(STUB_WORD_VECTORS)?;
            if let Some(want) = &self.word_vectors_sha256 {
                if !want.eq_ignore_ascii_case(wv.sha256()) {
                    return Err(WordVectorError::Checksum { expected: want.clone(), found: wv.sha256().into() }.into());
                }
            }
            wv
        } else {
            WordVectors::load(&resolve(base, &self.word_vectors), self.word_vectors_sha256.as_deref())?
        };
        let stop_words = if self.stop_words == "bundled" {
            StopWords::bundled()
        } else {
            let path = resolve(base, &self.stop_words);
            StopWords::load(&path).map_err(|source| BackendsError::Io { path, source })?
        };

        let embedding_use = self.embedder("embedding_use", &self.embedding_use, EmbeddingBackendId::UseStyle)?;
        let embedding_sbert = self.embedder("embedding_sbert", &self.embedding_sbert, EmbeddingBackendId::SbertStyle)?;
        let lpips_conv = self.perceptual("lpips_conv", &self.lpips_conv, MetricId::LpipsConv)?;
        let lpips_transformer = self.perceptual("lpips_transformer", &self.lpips_transformer, MetricId::LpipsTransformer)?;

        let mut snapshot = BTreeMap::new();
        snapshot.insert("captioner".into(), captioner.id());
        snapshot.insert("generator".into(), generator.id());
        let slot_name = |s: &Result<String, String>| s.clone().unwrap_or_else(|e| format!("unavailable ({e})"));
        snapshot.insert("embedding_use".into(), slot_name(&embedding_use.as_ref().map(|b| b.name()).map_err(Clone::clone)));
        snapshot.insert("embedding_sbert".into(), slot_name(&embedding_sbert.as_ref().map(|b| b.name()).map_err(Clone::clone)));
        snapshot.insert("lpips_conv".into(), slot_name(&lpips_conv.as_ref().map(|b| b.name()).map_err(Clone::clone)));
        snapshot.insert(
            "lpips_transformer".into(),
            slot_name(&lpips_transformer.as_ref().map(|b| b.name()).map_err(Clone::clone)),
        );
        snapshot.insert("word_vectors".into(), self.word_vectors.clone());
        snapshot.insert("word_vectors_sha256".into(), word_vectors.sha256().into());
        snapshot.insert("stop_words".into(), format!("{} ({} words)", self.stop_words, stop_words.len()));
        snapshot.insert("bins".into(), self.bins.to_string());

        Ok(Backends {
            captioner,
            generator,
            embedding_use,
            embedding_sbert,
            lpips_conv,
            lpips_transformer,
            word_vectors: Arc::new(word_vectors),
            stop_words: Arc::new(stop_words),
            bins: self.bins,
            snapshot,
        })
    }
}

impl Backends {
    /// All-stub backends with default bins.
    pub fn stub() -> Self {
        BackendsConfig::default().build(Path::new(".")).expect("stub backends always build")
    }
}
