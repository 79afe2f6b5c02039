use std::collections::{BTreeMap, HashMap};

use crate::score::{MetricId, SimilarityScore};

use super::preprocess::TokenizedSentence;

/// IDF fitted on a study corpus: `idf(t) = ln(N / df(t)) + 1`, raw term
/// counts, L2-normalized vectors. Without smoothing, the IDF depends only
/// on document frequencies relative to N, so duplicating the corpus leaves
/// every score unchanged.
#[derive(Debug, Clone, Default)]
pub struct TfidfModel {
    idf: HashMap<String, f64>,
    documents: usize,
}

impl TfidfModel {
    pub fn fit<'a, I>(corpus: I) -> Self
    where
        I: IntoIterator<Item = &'a TokenizedSentence>,
    {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut documents = 0usize;
        for doc in corpus {
            documents += 1;
            let mut seen: Vec<&String> = doc.tokens.iter().collect();
            seen.sort();
            seen.dedup();
            for t in seen {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        let n = documents as f64;
        let idf = df
            .into_iter()
            .map(|(t, d)| (t, (n / d as f64).ln() + 1.0))
            .collect();
        TfidfModel { idf, documents }
    }

    pub fn documents(&self) -> usize {
        self.documents
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.idf.get(term).copied()
    }

    /// Sparse normalized TF-IDF vector; terms unseen at fit time are dropped.
    pub fn vector(&self, doc: &TokenizedSentence) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in &doc.tokens {
            if self.idf.contains_key(t) {
                *tf.entry(t.clone()).or_default() += 1.0;
            }
        }
        for (t, w) in tf.iter_mut() {
            *w *= self.idf[t];
        }
        let norm = tf.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for w in tf.values_mut() {
                *w /= norm;
            }
        }
        tf
    }

    /// Cosine of the two TF-IDF vectors; 0 (flagged degenerate) when either
    /// vector is all zero.
    pub fn similarity(&self, a: &TokenizedSentence, b: &TokenizedSentence) -> SimilarityScore {
        sparse_cosine(&self.vector(a), &self.vector(b))
    }
}

pub(crate) fn sparse_cosine(va: &BTreeMap<String, f64>, vb: &BTreeMap<String, f64>) -> SimilarityScore {
    if va.is_empty() || vb.is_empty() {
        return SimilarityScore::degenerate(MetricId::Tfidf, 0.0);
    }
    // iterate the smaller map in key order so (a,b) and (b,a) sum identically
    let (small, large) = if (va.len(), va.keys().next()) <= (vb.len(), vb.keys().next()) {
        (va, vb)
    } else {
        (vb, va)
    };
    let dot: f64 = small
        .iter()
        .filter_map(|(t, w)| large.get(t).map(|v| w * v))
        .sum();
    SimilarityScore::new(MetricId::Tfidf, dot.clamp(0.0, 1.0))
}

/// Convenience wrapper: TF-IDF cosine of `a` and `b` under a model fitted on
/// `corpus`.
pub fn tfidf_similarity(corpus: &[TokenizedSentence], a: &TokenizedSentence, b: &TokenizedSentence) -> SimilarityScore {
    TfidfModel::fit(corpus).similarity(a, b)
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

    #[test]
    fn identical_is_one_disjoint_is_zero() {
        let a = doc(&["red", "apple", "table"]);
        let b = doc(&["blue", "sky"]);
        let corpus = vec![a.clone(), b.clone()];
        assert!((tfidf_similarity(&corpus, &a, &a).value - 1.0).abs() < 1e-12);
        assert_eq!(tfidf_similarity(&corpus, &a, &b).value, 0.0);
    }

    // Hand computation, corpus of 3 documents:
    //   d1 = [cat, mat, cat], d2 = [cat, dog], d3 = [dog, park]
    // df: cat 2, mat 1, dog 2, park 1; N = 3
    // idf: cat = ln(3/2)+1, mat = ln 3+1, dog = ln(3/2)+1, park = ln 3+1
    // v(d1) ∝ (cat: 2·idf_cat, mat: idf_mat); v(d2) ∝ (cat: idf_cat, dog: idf_dog)
    // cos(d1,d2) = 2·idf_cat² / (sqrt(4 idf_cat² + idf_mat²) · sqrt(idf_cat² + idf_dog²))
    #[test]
    fn hand_computed_three_document_corpus() {
        let d1 = doc(&["cat", "mat", "cat"]);
        let d2 = doc(&["cat", "dog"]);
        let d3 = doc(&["dog", "park"]);
        let corpus = vec![d1.clone(), d2.clone(), d3.clone()];
        let ic = 1.5f64.ln() + 1.0;
        let im = 3f64.ln() + 1.0;
        let expected = 2.0 * ic * ic / ((4.0 * ic * ic + im * im).sqrt() * (2.0 * ic * ic).sqrt());
        let got = tfidf_similarity(&corpus, &d1, &d2).value;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        // scikit-learn TfidfVectorizer(smooth_idf=False) gives the same value
        assert!((got - 0.566_611_512_9).abs() < 1e-9, "{got}");
        // d2/d3 share "dog" only
        let e23 = ic * ic / ((2.0 * ic * ic).sqrt() * (ic * ic + im * im).sqrt());
        assert!((tfidf_similarity(&corpus, &d2, &d3).value - e23).abs() < 1e-12);
    }

    #[test]
    fn duplicating_the_corpus_keeps_scores() {
        let docs = vec![doc(&["cat", "mat"]), doc(&["cat", "dog", "dog"]), doc(&["park"])];
        let doubled: Vec<_> = docs.iter().chain(docs.iter()).cloned().collect();
        let a = tfidf_similarity(&docs, &docs[0], &docs[1]).value;
        let b = tfidf_similarity(&doubled, &docs[0], &docs[1]).value;
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn unseen_terms_give_degenerate_zero() {
        let corpus = vec![doc(&["cat"])];
        let s = tfidf_similarity(&corpus, &doc(&["cat"]), &doc(&["zebra"]));
        assert_eq!(s.value, 0.0);
        assert!(s.is_degenerate());
    }
}
