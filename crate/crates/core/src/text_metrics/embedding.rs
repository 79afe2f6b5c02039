//! Sentence-embedding cosine similarity.

use serde::{Deserialize, Serialize};

use crate::pipeline::BackendError;
use crate::score::{MetricId, SimilarityScore};

use super::repeats::collapse_repeats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingBackendId {
    /// Transformer sentence encoder in the Universal Sentence Encoder family.
    UseStyle,
    /// Siamese BERT-style sentence encoder.
    SbertStyle,
    /// Deterministic feature-hashing embedding for tests.
    TestHash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEmbedding {
    pub backend_id: EmbeddingBackendId,
    pub vector: Vec<f64>,
}

pub trait SentenceEmbedder: Send + Sync {
    fn backend_id(&self) -> EmbeddingBackendId;
    /// Model identity recorded in study snapshots.
    fn name(&self) -> String;
    /// Embeds a batch; batching must not change any vector by more than 1e-6.
    fn embed(&self, sentences: &[String]) -> Result<Vec<SentenceEmbedding>, BackendError>;
}

pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot / (na * nb))
}

fn metric_for(backend: EmbeddingBackendId) -> MetricId {
    match backend {
        EmbeddingBackendId::SbertStyle => MetricId::Sbert,
        _ => MetricId::Use,
    }
}

/// Cosine of two embeddings as a score under `metric`. Negative cosines are
/// kept as they are.
pub fn embedding_score(metric: MetricId, a: &SentenceEmbedding, b: &SentenceEmbedding) -> SimilarityScore {
    match cosine(&a.vector, &b.vector) {
        Some(c) => SimilarityScore::new(metric, c.clamp(-1.0, 1.0)),
        None => SimilarityScore::degenerate(metric, 0.0),
    }
}

/// Collapses repeats, embeds both raw sentences, returns their cosine.
pub fn embedding_similarity(a: &str, b: &str, backend: &dyn SentenceEmbedder) -> Result<SimilarityScore, BackendError> {
    embedding_similarity_as(metric_for(backend.backend_id()), a, b, backend)
}

/// As [`embedding_similarity`], reported under an explicit metric slot.
pub fn embedding_similarity_as(
    metric: MetricId,
    a: &str,
    b: &str,
    backend: &dyn SentenceEmbedder,
) -> Result<SimilarityScore, BackendError> {
    let batch = vec![collapse_repeats(a), collapse_repeats(b)];
    let out = backend.embed(&batch)?;
    if out.len() != 2 {
        return Err(BackendError::Failure(format!("expected 2 embeddings, got {}", out.len())));
    }
    Ok(embedding_score(metric, &out[0], &out[1]))
}

/// Signed feature hashing of word unigrams and character trigrams into a
/// fixed-length, L2-normalized vector. Fully deterministic.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: 256 }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl HashEmbedder {
    pub fn embed_one(&self, sentence: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let mut add = |feature: &[u8], weight: f64| {
            let h = fnv1a(feature);
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign * weight;
        };
        let lower = sentence.to_lowercase();
        for word in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            let mut key = b"w:".to_vec();
            key.extend_from_slice(word.as_bytes());
            add(&key, 1.0);
            let padded: Vec<char> = format!(" {word} ").chars().collect();
            for tri in padded.windows(3) {
                let mut key = b"c:".to_vec();
                key.extend_from_slice(tri.iter().collect::<String>().as_bytes());
                add(&key, 0.5);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl SentenceEmbedder for HashEmbedder {
    fn backend_id(&self) -> EmbeddingBackendId {
        EmbeddingBackendId::TestHash
    }

    fn name(&self) -> String {
        format!("test-hash-embedder/fnv1a-dim{}", self.dim)
    }

    fn embed(&self, sentences: &[String]) -> Result<Vec<SentenceEmbedding>, BackendError> {
        Ok(sentences
            .iter()
            .map(|s| SentenceEmbedding {
                backend_id: EmbeddingBackendId::TestHash,
                vector: self.embed_one(s),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn self_similarity_is_one() {
        let s = embedding_similarity("a dog runs in the park", "a dog runs in the park", &HashEmbedder::default()).unwrap();
        assert!((s.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn repeats_are_collapsed_first() {
        let s = embedding_similarity("a dog a dog runs", "a dog runs", &HashEmbedder::default()).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batching_does_not_change_vectors() {
        let e = HashEmbedder::default();
        let batch = e.embed(&["one".into(), "two words".into()]).unwrap();
        let single = e.embed(&["two words".into()]).unwrap();
        assert_eq!(batch[1], single[0]);
    }

    #[test]
    fn empty_sentence_is_degenerate() {
        let s = embedding_similarity("", "a cat", &HashEmbedder::default()).unwrap();
        assert!(s.is_degenerate());
    }

    // Golden values, computed by an independent Python re-implementation of
    // the hashing scheme.
    #[test]
    fn golden_hash_cosines() {
        let e = HashEmbedder::default();
        let cases = [
            ("a red apple on a table", "a green apple on a table", 0.840_168_050_4),
            ("a man rides a horse", "a woman walks a dog", 0.500_118_189_3),
            ("a cat sleeps on a sofa", "the stock market fell sharply", 0.040_850_368_5),
        ];
        for (a, b, want) in cases {
            let got = embedding_similarity(a, b, &e).unwrap().value;
            assert!((got - want).abs() < 1e-9, "{a} / {b}: {got:.10}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn cosine_is_symmetric(a in "[a-z ]{0,40}", b in "[a-z ]{0,40}") {
            let e = HashEmbedder::default();
            let ab = embedding_similarity(&a, &b, &e).unwrap().value;
            let ba = embedding_similarity(&b, &a, &e).unwrap().value;
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }
    }
}
