//! Sentence-hood and length constraints on captioner output.

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{BackendError, Captioner, LengthHint};
use super::clock::Clock;
use super::config::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Caption {
    pub text: String,
    pub word_count: usize,
    pub source_frame_id: u64,
    /// Seconds.
    pub caption_latency: f64,
    /// Cut back to the upper bound after the retry.
    #[serde(default)]
    pub truncated: bool,
    /// The first captioner answer was out of bounds and a second call was made.
    #[serde(default)]
    pub retried: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaptionError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("caption has {words} words / {chars} chars; bounds are {min_words}..={max_words} words{char_note}")]
    ConstraintUnsatisfiable {
        words: usize,
        chars: usize,
        min_words: usize,
        max_words: usize,
        char_note: String,
    },
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Collapses all whitespace (line breaks included) to single spaces and keeps
/// the first sentence. A sentence ends at `.`, `!` or `?` followed by
/// whitespace or the end of the text; the terminator is dropped.
pub fn first_sentence(raw: &str) -> String {
    let flat = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    let chars: Vec<char> = flat.chars().collect();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let at_end = i + 1 == chars.len() || chars[i + 1] == ' ';
            // "..." and "?!" runs end together
            let mut j = i;
            while j + 1 < chars.len() && matches!(chars[j + 1], '.' | '!' | '?') {
                j += 1;
            }
            let at_end = at_end || j + 1 == chars.len() || chars[j + 1] == ' ';
            if at_end {
                let s: String = chars[start..i].iter().collect();
                let s = s.trim();
                if s.chars().any(|c| c.is_alphanumeric()) {
                    return s.to_string();
                }
                start = j + 1;
            }
            i = j + 1;
            continue;
        }
        i += 1;
    }
    let s: String = chars[start.min(chars.len())..].iter().collect();
    s.trim().to_string()
}

const CLAUSE_WORDS: [&str; 9] = ["and", "but", "while", "with", "which", "where", "as", "or", "that"];

fn strip_trailing_punct(word: &str) -> &str {
    let t = word.trim_end_matches([',', ';', ':', '-']);
    if t.is_empty() {
        word
    } else {
        t
    }
}

/// Cuts `text` back to at most `max_words` words, preferring the last clause
/// boundary that still leaves at least `min_words`. A clause boundary is a
/// word ending in `,` `;` or `:`, or a position followed by a conjunction.
/// Never cuts inside a word. Returns the text and whether it was shortened.
pub fn truncate_to_bound(text: &str, min_words: usize, max_words: usize) -> (String, bool) {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() <= max_words {
        return (words.join(" "), false);
    }
    let is_boundary = |k: usize| {
        // boundary after the first k words
        let prev = words[k - 1];
        prev.ends_with([',', ';', ':'])
            || CLAUSE_WORDS.contains(&words[k].to_ascii_lowercase().trim_matches(|c: char| !c.is_alphanumeric()))
    };
    let lo = min_words.max(1);
    let keep = (lo..=max_words).rev().find(|&k| is_boundary(k)).unwrap_or(max_words);
    let mut kept: Vec<&str> = words[..keep].to_vec();
    if let Some(last) = kept.last_mut() {
        *last = strip_trailing_punct(last);
    }
    (kept.join(" "), true)
}

/// Largest word-aligned prefix of `text` no longer than `max_chars` characters.
pub fn truncate_to_chars(text: &str, max_chars: usize) -> (String, bool) {
    if text.chars().count() <= max_chars {
        return (text.to_string(), false);
    }
    let mut out = String::new();
    for w in text.split_whitespace() {
        let extra = if out.is_empty() { 0 } else { 1 } + w.chars().count();
        if out.chars().count() + extra > max_chars {
            break;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
    let trimmed = strip_trailing_punct(&out).to_string();
    (trimmed, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fit {
    Ok,
    TooLong,
    TooShort,
}

fn fit(text: &str, config: &PipelineConfig) -> Fit {
    let words = word_count(text);
    let chars = text.chars().count();
    if words > config.max_words || config.max_chars.is_some_and(|m| chars > m) {
        Fit::TooLong
    } else if words < config.min_words || config.min_chars.is_some_and(|m| chars < m) {
        Fit::TooShort
    } else {
        Fit::Ok
    }
}

fn unsatisfiable(text: &str, config: &PipelineConfig) -> CaptionError {
    let char_note = match (config.min_chars, config.max_chars) {
        (None, None) => String::new(),
        (lo, hi) => format!(
            " and {}..={} chars",
            lo.map_or("0".into(), |v| v.to_string()),
            hi.map_or("∞".into(), |v| v.to_string())
        ),
    };
    CaptionError::ConstraintUnsatisfiable {
        words: word_count(text),
        chars: text.chars().count(),
        min_words: config.min_words,
        max_words: config.max_words,
        char_note,
    }
}

/// Applies the configured bounds to an already single-sentence text:
/// truncates when too long, fails when too short. Returns the text and the
/// truncation flag.
pub fn enforce_bounds(text: &str, config: &PipelineConfig) -> Result<(String, bool), CaptionError> {
    let (mut out, mut truncated) = truncate_to_bound(text, config.min_words, config.max_words);
    if let Some(max_chars) = config.max_chars {
        let (t, cut) = truncate_to_chars(&out, max_chars);
        out = t;
        truncated |= cut;
    }
    match fit(&out, config) {
        Fit::Ok => Ok((out, truncated)),
        _ => Err(unsatisfiable(&out, config)),
    }
}

/// Image → one in-bounds sentence.
///
/// One retry with a tighter length hint when the first answer is out of
/// bounds, then clause-boundary truncation. Short captions are never padded.
pub fn adapt_image_to_text(
    image: &RgbImage,
    frame_id: u64,
    config: &PipelineConfig,
    captioner: &dyn Captioner,
    clock: &dyn Clock,
) -> Result<Caption, CaptionError> {
    let started = clock.now();
    let hint = LengthHint {
        min_words: config.min_words,
        max_words: config.max_words,
    };
    let mut text = first_sentence(&captioner.describe(image, hint)?);
    let mut retried = false;
    let first_fit = fit(&text, config);
    if first_fit != Fit::Ok {
        let mid = (config.min_words + config.max_words) / 2;
        let tighter = match first_fit {
            Fit::TooLong => LengthHint { min_words: config.min_words, max_words: mid.max(config.min_words) },
            _ => LengthHint { min_words: mid.min(config.max_words), max_words: config.max_words },
        };
        let second = first_sentence(&captioner.describe(image, tighter)?);
        retried = true;
        // keep whichever answer is closer to usable: an in-bounds one, else
        // the second one if it can be truncated, else the first.
        let second_fit = fit(&second, config);
        if second_fit == Fit::Ok || second_fit == Fit::TooLong || first_fit == Fit::TooShort {
            text = second;
        }
    }
    let (text, truncated) = enforce_bounds(&text, config)?;
    Ok(Caption {
        word_count: word_count(&text),
        text,
        source_frame_id: frame_id,
        caption_latency: (clock.now() - started).max(0.0),
        truncated,
        retried,
    })
}
