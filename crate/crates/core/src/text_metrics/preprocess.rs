//! Lowercasing, tokenization and stop-word removal for the word-level
//! metrics.
//!
//! Tokens are maximal runs of alphanumeric characters after lowercasing, so
//! "don't" yields "don" and "t" (both in the bundled list). The bundled list
//! is the 179-word English list shipped with NLTK, in `data/stopwords_en.txt`.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreprocessError {
    #[error("no tokens left after stop-word removal: {0:?}")]
    EmptyAfterPreprocess(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedSentence {
    pub original: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    /// One token per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        StopWords {
            words: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        }
    }

    pub fn bundled() -> Self {
        StopWords::parse(BUNDLED_STOPWORDS)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(StopWords::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for StopWords {
    fn default() -> Self {
        StopWords::bundled()
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Expects text that has already been through `collapse_repeats`.
pub fn preprocess(text: &str, stop_words: &StopWords) -> Result<TokenizedSentence, PreprocessError> {
    let tokens: Vec<String> = tokenize(text).into_iter().filter(|t| !stop_words.contains(t)).collect();
    if tokens.is_empty() {
        return Err(PreprocessError::EmptyAfterPreprocess(text.to_string()));
    }
    Ok(TokenizedSentence {
        original: text.to_string(),
        tokens,
    })
}
