//! Scores every paired and random pair of a round-trip run on the text and
//! visual metrics.

use serde::Serialize;

use crate::image_metrics::{detect, match_score, ColorHistogram, KeypointSet, PerceptualBackend, SiftParams};
use crate::par::{self, Parallelism};
use crate::pipeline::BackendError;
use crate::score::{MetricId, SimilarityScore};
use crate::stats::ConditionSet;
use crate::text_metrics::embedding::embedding_score;
use crate::text_metrics::{collapse_repeats, preprocess, wmd_similarity, SentenceEmbedder, SentenceEmbedding, TfidfModel, TokenizedSentence};

use super::backends::{Backends, Slot};
use super::roundtrip::RoundTrip;

/// Aligned scores for one metric. Index `k` of `paired` and `random`
/// derive from the same pre item `item_index[k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricScores {
    pub metric_id: MetricId,
    pub backend: String,
    pub item_index: Vec<usize>,
    pub paired: Vec<f64>,
    pub random: Vec<f64>,
    /// Items dropped for this metric only (e.g. nothing left after
    /// stop-word removal), with the reason.
    pub excluded: Vec<(usize, String)>,
    pub degenerate_paired: usize,
    pub degenerate_random: usize,
}

/// Outcome for one metric: scores, or the reason the row is skipped.
pub type MetricOutcome = Result<MetricScores, (MetricId, String)>;

enum PairError {
    /// Only this item is dropped from the metric.
    Exclude(String),
    /// The whole metric is skipped.
    Unavailable(String),
}

impl From<BackendError> for PairError {
    fn from(e: BackendError) -> Self {
        PairError::Unavailable(e.to_string())
    }
}

fn collect<F>(metric: MetricId, backend: String, paired: &ConditionSet, random: &ConditionSet, mode: Parallelism, score: F) -> MetricOutcome
where
    F: Fn(usize, usize) -> Result<SimilarityScore, PairError> + Sync + Send,
{
    let n = paired.n;
    let results = par::map_range(2 * n, mode, |k| {
        let (pre, post) = if k < n { paired.pairs[k] } else { random.pairs[k - n] };
        score(pre, post)
    });
    let (p_res, r_res) = results.split_at(n);
    let mut out = MetricScores {
        metric_id: metric,
        backend,
        item_index: Vec::new(),
        paired: Vec::new(),
        random: Vec::new(),
        excluded: Vec::new(),
        degenerate_paired: 0,
        degenerate_random: 0,
    };
    for i in 0..n {
        match (&p_res[i], &r_res[i]) {
            (Err(PairError::Unavailable(msg)), _) | (_, Err(PairError::Unavailable(msg))) => {
                return Err((metric, msg.clone()));
            }
            (Err(PairError::Exclude(msg)), _) | (_, Err(PairError::Exclude(msg))) => {
                out.excluded.push((i, msg.clone()));
            }
            (Ok(p), Ok(r)) => {
                out.item_index.push(i);
                out.paired.push(p.value);
                out.random.push(r.value);
                out.degenerate_paired += p.is_degenerate() as usize;
                out.degenerate_random += r.is_degenerate() as usize;
            }
        }
    }
    Ok(out)
}

fn tokenized(texts: &[String], backends: &Backends) -> Vec<Result<TokenizedSentence, String>> {
    texts
        .iter()
        .map(|t| preprocess(&collapse_repeats(t), &backends.stop_words).map_err(|e| e.to_string()))
        .collect()
}

fn embed_all(backend: &dyn SentenceEmbedder, texts: &[String]) -> Result<Vec<SentenceEmbedding>, BackendError> {
    let collapsed: Vec<String> = texts.iter().map(|t| collapse_repeats(t)).collect();
    let out = backend.embed(&collapsed)?;
    if out.len() != texts.len() {
        return Err(BackendError::Failure(format!("asked for {} embeddings, got {}", texts.len(), out.len())));
    }
    Ok(out)
}

fn embedding_metric(
    metric: MetricId,
    slot: &Slot<dyn SentenceEmbedder>,
    pre: &[String],
    post: &[String],
    paired: &ConditionSet,
    random: &ConditionSet,
    mode: Parallelism,
) -> MetricOutcome {
    let backend = slot.as_ref().map_err(|reason| (metric, reason.clone()))?;
    let ea = embed_all(backend.as_ref(), pre).map_err(|e| (metric, e.to_string()))?;
    let eb = embed_all(backend.as_ref(), post).map_err(|e| (metric, e.to_string()))?;
    collect(metric, backend.name(), paired, random, mode, |i, j| Ok(embedding_score(metric, &ea[i], &eb[j])))
}

/// Caption_pre vs caption_post on TF-IDF, WMD, USE-style and SBERT-style
/// cosine. The TF-IDF model is fit on every pre and post caption of the run.
pub fn score_text(trips: &[RoundTrip], paired: &ConditionSet, random: &ConditionSet, backends: &Backends, mode: Parallelism) -> Vec<MetricOutcome> {
    let pre: Vec<String> = trips.iter().map(|t| t.caption_pre.text.clone()).collect();
    let post: Vec<String> = trips.iter().map(|t| t.caption_post.text.clone()).collect();
    let tok_pre = tokenized(&pre, backends);
    let tok_post = tokenized(&post, backends);
    let model = TfidfModel::fit(tok_pre.iter().chain(&tok_post).filter_map(|t| t.as_ref().ok()));
    let both = |i: usize, j: usize| -> Result<(&TokenizedSentence, &TokenizedSentence), PairError> {
        let a = tok_pre[i].as_ref().map_err(|e| PairError::Exclude(e.clone()))?;
        let b = tok_post[j].as_ref().map_err(|e| PairError::Exclude(e.clone()))?;
        Ok((a, b))
    };
    let tfidf = collect(MetricId::Tfidf, "tfidf/raw-tf,idf=ln(N/df)+1".into(), paired, random, mode, |i, j| {
        let (a, b) = both(i, j)?;
        Ok(model.similarity(a, b))
    });
    let wv = &backends.word_vectors;
    let wmd = collect(MetricId::Wmd, format!("wmd/{}", &wv.sha256()[..12]), paired, random, mode, |i, j| {
        let (a, b) = both(i, j)?;
        wmd_similarity(a, b, wv).map_err(|e| PairError::Exclude(e.to_string()))
    });
    let use_ = embedding_metric(MetricId::Use, &backends.embedding_use, &pre, &post, paired, random, mode);
    let sbert = embedding_metric(MetricId::Sbert, &backends.embedding_sbert, &pre, &post, paired, random, mode);
    vec![tfidf, wmd, use_, sbert]
}

fn perceptual_metric(
    metric: MetricId,
    slot: &Slot<dyn PerceptualBackend>,
    trips: &[RoundTrip],
    paired: &ConditionSet,
    random: &ConditionSet,
    mode: Parallelism,
) -> MetricOutcome {
    let backend = slot.as_ref().map_err(|reason| (metric, reason.clone()))?;
    collect(metric, backend.name(), paired, random, mode, |i, j| {
        Ok(SimilarityScore::new(metric, backend.distance(&trips[i].input, &trips[j].output)?))
    })
}

/// Input image vs output image on histogram intersection, SIFT matching and
/// both perceptual distances.
pub fn score_visual(trips: &[RoundTrip], paired: &ConditionSet, random: &ConditionSet, backends: &Backends, mode: Parallelism) -> Vec<MetricOutcome> {
    let bins = backends.bins;
    let hist_in = par::map(trips, mode, |t| ColorHistogram::from_rgb(&t.input, bins));
    let hist_out = par::map(trips, mode, |t| ColorHistogram::from_rgb(&t.output, bins));
    let hi = collect(MetricId::Hi, format!("cielab-histogram/{bins}^3"), paired, random, mode, |i, j| {
        Ok(SimilarityScore::new(MetricId::Hi, hist_in[i].intersection(&hist_out[j])))
    });
    let params = SiftParams::default();
    let kp_in: Vec<KeypointSet> = par::map(trips, mode, |t| detect(&t.input, &params));
    let kp_out: Vec<KeypointSet> = par::map(trips, mode, |t| detect(&t.output, &params));
    let sift = collect(MetricId::Sift, "sift/mutual-ratio-0.75".into(), paired, random, mode, |i, j| {
        Ok(match_score(&kp_in[i], &kp_out[j], params.ratio))
    });
    let conv = perceptual_metric(MetricId::LpipsConv, &backends.lpips_conv, trips, paired, random, mode);
    let vit = perceptual_metric(MetricId::LpipsTransformer, &backends.lpips_transformer, trips, paired, random, mode);
    vec![hi, sift, conv, vit]
}
