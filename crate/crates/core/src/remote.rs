//! Blocking HTTP client for an external inference service hosting the real
//! captioner, generator, sentence encoders and LPIPS networks.
//!
//! Wire format (all bodies JSON, images as base64 PNG):
//!
//! | route            | request                                              | response                 |
//! |------------------|------------------------------------------------------|--------------------------|
//! | `GET /health`    |                                                      | `{status, models}`       |
//! | `POST /caption`  | `{model, image_png_b64, min_words, max_words}`       | `{caption}`              |
//! | `POST /generate` | `{model, prompt, steps, seed, resolution}`           | `{image_png_b64}`        |
//! | `POST /embed`    | `{model, sentences}`                                 | `{embeddings: [[f64]]}`  |
//! | `POST /lpips`    | `{net, a_png_b64, b_png_b64}`                        | `{distance}`             |

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use image::RgbImage;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::image_metrics::PerceptualBackend;
use crate::pipeline::{BackendError, Captioner, Generator, LengthHint};
use crate::raster;
use crate::score::MetricId;
use crate::text_metrics::{EmbeddingBackendId, SentenceEmbedder, SentenceEmbedding};

#[derive(Debug, Clone)]
pub struct RemoteClient {
    base_url: String,
    agent: ureq::Agent,
    timeout: Duration,
}

impl RemoteClient {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        RemoteClient {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            timeout,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn map_err(&self, e: ureq::Error) -> BackendError {
        match e {
            ureq::Error::Status(code, resp) => {
                let body = resp.into_string().unwrap_or_default();
                BackendError::Failure(format!("HTTP {code}: {}", body.chars().take(200).collect::<String>()))
            }
            ureq::Error::Transport(t) => {
                let msg = t.to_string();
                if msg.contains("timed out") {
                    BackendError::Timeout(self.timeout.as_secs_f64())
                } else {
                    BackendError::Unavailable(format!("{}: {msg}", self.base_url))
                }
            }
        }
    }

    pub fn health(&self) -> Result<Value, BackendError> {
        let resp = self.agent.get(&format!("{}/health", self.base_url)).call().map_err(|e| self.map_err(e))?;
        resp.into_json().map_err(|e| BackendError::Failure(format!("bad health body: {e}")))
    }

    fn post<T: DeserializeOwned>(&self, route: &str, body: Value) -> Result<T, BackendError> {
        let resp = self
            .agent
            .post(&format!("{}/{route}", self.base_url))
            .send_json(body)
            .map_err(|e| self.map_err(e))?;
        resp.into_json().map_err(|e| BackendError::Failure(format!("bad /{route} body: {e}")))
    }
}

fn png_b64(image: &RgbImage) -> String {
    B64.encode(raster::encode_png(image))
}

#[derive(Deserialize)]
struct CaptionResponse {
    caption: String,
}

#[derive(Deserialize)]
struct GenerateResponse {
    image_png_b64: String,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct LpipsResponse {
    distance: f64,
}

#[derive(Debug, Clone)]
pub struct RemoteCaptioner {
    pub client: RemoteClient,
    pub model: String,
}

impl Captioner for RemoteCaptioner {
    fn id(&self) -> String {
        format!("remote:{}", self.model)
    }

    fn describe(&self, image: &RgbImage, hint: LengthHint) -> Result<String, BackendError> {
        let r: CaptionResponse = self.client.post(
            "caption",
            json!({
                "model": self.model,
                "image_png_b64": png_b64(image),
                "min_words": hint.min_words,
                "max_words": hint.max_words,
            }),
        )?;
        Ok(r.caption)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    pub client: RemoteClient,
    pub model: String,
}

impl Generator for RemoteGenerator {
    fn id(&self) -> String {
        format!("remote:{}", self.model)
    }

    fn render(&self, prompt: &str, steps: u32, seed: u64, resolution: u32) -> Result<RgbImage, BackendError> {
        let r: GenerateResponse = self.client.post(
            "generate",
            json!({
                "model": self.model,
                "prompt": prompt,
                "steps": steps,
                "seed": seed,
                "resolution": resolution,
            }),
        )?;
        let bytes = B64
            .decode(r.image_png_b64)
            .map_err(|e| BackendError::Failure(format!("bad base64 image: {e}")))?;
        raster::decode_image(&bytes).map_err(|e| BackendError::Failure(format!("undecodable image: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    pub client: RemoteClient,
    pub model: String,
    pub backend_id: EmbeddingBackendId,
}

impl SentenceEmbedder for RemoteEmbedder {
    fn backend_id(&self) -> EmbeddingBackendId {
        self.backend_id
    }

    fn name(&self) -> String {
        format!("remote:{}", self.model)
    }

    fn embed(&self, sentences: &[String]) -> Result<Vec<SentenceEmbedding>, BackendError> {
        let r: EmbedResponse = self.client.post("embed", json!({ "model": self.model, "sentences": sentences }))?;
        if r.embeddings.len() != sentences.len() {
            return Err(BackendError::Failure(format!(
                "asked for {} embeddings, got {}",
                sentences.len(),
                r.embeddings.len()
            )));
        }
        Ok(r.embeddings
            .into_iter()
            .map(|vector| SentenceEmbedding { backend_id: self.backend_id, vector })
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct RemotePerceptual {
    pub client: RemoteClient,
    /// Network name understood by the service, e.g. `alex` or `vit`.
    pub net: String,
    pub metric: MetricId,
}

impl PerceptualBackend for RemotePerceptual {
    fn metric_id(&self) -> MetricId {
        self.metric
    }

    fn name(&self) -> String {
        format!("remote:lpips-{}", self.net)
    }

    fn distance(&self, a: &RgbImage, b: &RgbImage) -> Result<f64, BackendError> {
        let r: LpipsResponse = self
            .client
            .post("lpips", json!({ "net": self.net, "a_png_b64": png_b64(a), "b_png_b64": png_b64(b) }))?;
        Ok(r.distance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unreachable_service_is_unavailable() {
        // port 9 (discard) on localhost is not expected to serve HTTP
        let client = RemoteClient::new("http://127.0.0.1:9/", Duration::from_millis(500));
        assert_eq!(client.base_url(), "http://127.0.0.1:9");
        let cap = RemoteCaptioner { client, model: "m".into() };
        let err = cap
            .describe(&RgbImage::new(4, 4), LengthHint { min_words: 1, max_words: 5 })
            .unwrap_err();
        assert!(matches!(err, BackendError::Unavailable(_) | BackendError::Timeout(_)), "{err:?}");
    }
}
