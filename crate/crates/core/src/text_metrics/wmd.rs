use std::collections::BTreeMap;

use thiserror::Error;

use crate::score::{MetricId, SimilarityScore};

use super::preprocess::TokenizedSentence;
use super::transport::min_cost_transport;
use super::word_vectors::WordVectors;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WmdError {
    #[error("empty token list")]
    EmptyAfterPreprocess,
    #[error("no token of {0:?} has a word vector")]
    AllTokensOov(String),
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Normalized bag of words over in-vocabulary tokens, as (vector, count).
fn bag<'v>(doc: &TokenizedSentence, vectors: &'v WordVectors) -> Result<Vec<(&'v [f64], u64)>, WmdError> {
    if doc.tokens.is_empty() {
        return Err(WmdError::EmptyAfterPreprocess);
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for t in &doc.tokens {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let bag: Vec<_> = counts
        .into_iter()
        .filter_map(|(t, c)| vectors.get(t).map(|v| (v, c)))
        .collect();
    if bag.is_empty() {
        return Err(WmdError::AllTokensOov(doc.original.clone()));
    }
    Ok(bag)
}

/// Word mover's distance: the optimal-transport cost between the two
/// normalized bag-of-words distributions under Euclidean word distances.
/// Out-of-vocabulary tokens are dropped and the bag renormalized.
pub fn wmd_distance(a: &TokenizedSentence, b: &TokenizedSentence, vectors: &WordVectors) -> Result<f64, WmdError> {
    let bag_a = bag(a, vectors)?;
    let bag_b = bag(b, vectors)?;
    let total_a: u64 = bag_a.iter().map(|(_, c)| c).sum();
    let total_b: u64 = bag_b.iter().map(|(_, c)| c).sum();
    // weights c_i/total_a and d_j/total_b, scaled to integers by total_a·total_b
    let supply: Vec<u64> = bag_a.iter().map(|(_, c)| c * total_b).collect();
    let demand: Vec<u64> = bag_b.iter().map(|(_, c)| c * total_a).collect();
    let (cost, _) = min_cost_transport(&supply, &demand, |i, j| euclidean(bag_a[i].0, bag_b[j].0));
    Ok((cost / (total_a * total_b) as f64).max(0.0))
}

/// `1 / (1 + d)`: 1 at distance 0, tending to 0 as the distance grows.
pub fn similarity_from_distance(d: f64) -> f64 {
    1.0 / (1.0 + d)
}

pub fn wmd_similarity(a: &TokenizedSentence, b: &TokenizedSentence, vectors: &WordVectors) -> Result<SimilarityScore, WmdError> {
    Ok(SimilarityScore::new(
        MetricId::Wmd,
        similarity_from_distance(wmd_distance(a, b, vectors)?),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(words: &[&str]) -> TokenizedSentence {
        TokenizedSentence {
            original: words.join(" "),
            tokens: words.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn toy() -> WordVectors {
        WordVectors::from_pairs(
            2,
            [
                ("cat", vec![0.0, 0.0]),
                ("dog", vec![3.0, 4.0]),
                ("mat", vec![1.0, 0.0]),
                ("rug", vec![1.0, 1.0]),
            ],
        )
    }

    #[test]
    fn identical_sentences() {
        let a = doc(&["cat", "mat", "cat"]);
        let s = wmd_similarity(&a, &a, &toy()).unwrap();
        assert_eq!(s.value, 1.0);
    }

    #[test]
    fn singletons_are_point_masses() {
        let d = wmd_distance(&doc(&["cat"]), &doc(&["dog"]), &toy()).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
        let s = wmd_similarity(&doc(&["cat"]), &doc(&["dog"]), &toy()).unwrap();
        assert!((s.value - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn uneven_bags() {
        // {cat, mat} vs {rug}: each half moves to rug
        let d = wmd_distance(&doc(&["cat", "mat"]), &doc(&["rug"]), &toy()).unwrap();
        let expected = 0.5 * 2f64.sqrt() + 0.5 * 1.0;
        assert!((d - expected).abs() < 1e-12);
    }

    #[test]
    fn oov_is_skipped_then_fails_when_nothing_left() {
        let d = wmd_distance(&doc(&["cat", "zebra"]), &doc(&["cat"]), &toy()).unwrap();
        assert_eq!(d, 0.0);
        assert!(matches!(
            wmd_distance(&doc(&["zebra"]), &doc(&["cat"]), &toy()),
            Err(WmdError::AllTokensOov(_))
        ));
        assert_eq!(
            wmd_distance(&doc(&[]), &doc(&["cat"]), &toy()),
            Err(WmdError::EmptyAfterPreprocess)
        );
    }

    #[test]
    fn monotone_in_distance() {
        let mut last = f64::INFINITY;
        for d in [0.0, 0.1, 1.0, 5.0, 100.0] {
            let s = similarity_from_distance(d);
            assert!(s < last && s > 0.0 && s <= 1.0);
            last = s;
        }
    }
}
