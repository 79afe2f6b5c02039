//! Caption rewrites that re-inject the wearer's point of view: first person,
//! where the object is, and what happened to it just before.
//!
//! Every augmenter is a total function on the sentence; when its pattern is
//! absent the sentence comes back unchanged.

use serde::{Deserialize, Serialize};

use super::caption::{truncate_to_bound, word_count, Caption};
use super::config::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmenterKind {
    Personhood,
    Spatial,
    Temporal,
}

impl AugmenterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AugmenterKind::Personhood => "personhood",
            AugmenterKind::Spatial => "spatial",
            AugmenterKind::Temporal => "temporal",
        }
    }
}

impl std::str::FromStr for AugmenterKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "personhood" => Ok(AugmenterKind::Personhood),
            "spatial" => Ok(AugmenterKind::Spatial),
            "temporal" => Ok(AugmenterKind::Temporal),
            other => Err(format!("unknown augmenter `{other}`")),
        }
    }
}

/// Horizontal third of the view the wearer is attending to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Left,
    Center,
    Right,
}

impl Region {
    /// `x` is the normalized horizontal position in `[0, 1]`.
    pub fn from_horizontal(x: f32) -> Region {
        if x < 1.0 / 3.0 {
            Region::Left
        } else if x < 2.0 / 3.0 {
            Region::Center
        } else {
            Region::Right
        }
    }

    /// Head yaw in degrees, negative to the left, mapped over a ±45° field.
    pub fn from_yaw(yaw_degrees: f32) -> Region {
        Region::from_horizontal(((yaw_degrees.clamp(-45.0, 45.0) + 45.0) / 90.0).min(0.999))
    }

    pub fn phrase(self) -> &'static str {
        match self {
            Region::Left => "on the left",
            Region::Center => "in the center",
            Region::Right => "on the right",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalHint {
    /// Head noun to attach to; when absent, the first noun phrase shared with
    /// the most recent previous caption is used.
    pub object: Option<String>,
    /// Relative clause body, e.g. "a girl tossed to me".
    pub clause: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentContext {
    pub region: Option<Region>,
    pub temporal: Option<TemporalHint>,
    #[serde(default)]
    pub previous_captions: Vec<String>,
}

const DETERMINERS: [&str; 3] = ["a", "an", "the"];
const PERSON_DETERMINERS: [&str; 4] = ["a", "the", "this", "that"];
const PHRASE_BREAKS: [&str; 34] = [
    "on", "in", "at", "with", "near", "next", "under", "over", "by", "beside", "behind", "is", "are", "was",
    "were", "and", "while", "which", "that", "of", "to", "from", "for", "into", "onto", "sits", "stands",
    "lies", "rests", "has", "have", "who", "against", "above",
];

fn bare(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
        .to_ascii_lowercase()
}

fn trailing_punct(word: &str) -> &str {
    let core_end = word
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    &word[core_end..]
}

/// "A person is touching an apple" → "I am touching an apple".
pub fn personhood(text: &str) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut out: Vec<String> = Vec::with_capacity(words.len());
    let mut i = 0;
    while i < words.len() {
        let is_subject_np = i + 1 < words.len()
            && PERSON_DETERMINERS.contains(&bare(words[i]).as_str())
            && trailing_punct(words[i]).is_empty()
            && matches!(bare(words[i + 1]).as_str(), "person" | "person's");
        if !is_subject_np {
            out.push(words[i].to_string());
            i += 1;
            continue;
        }
        let noun = words[i + 1];
        let punct = trailing_punct(noun);
        if bare(noun) == "person's" {
            out.push(format!("my{punct}"));
            i += 2;
            continue;
        }
        let subject_position = out.is_empty()
            || out.last().is_some_and(|w| {
                w.ends_with([',', ';', ':']) || matches!(bare(w).as_str(), "and" | "while" | "but" | "as")
            });
        let next = words.get(i + 2).map(|w| bare(w));
        match (punct.is_empty(), next.as_deref()) {
            (true, Some("is")) => {
                out.push("I".into());
                out.push(format!("am{}", trailing_punct(words[i + 2])));
                i += 3;
            }
            (true, Some("has")) => {
                out.push("I".into());
                out.push(format!("have{}", trailing_punct(words[i + 2])));
                i += 3;
            }
            _ => {
                let pronoun = if subject_position { "I" } else { "me" };
                out.push(format!("{pronoun}{punct}"));
                i += 2;
            }
        }
    }
    out.join(" ")
}

/// End index (exclusive) of the noun phrase opened by the determiner at `det`.
fn phrase_end(words: &[&str], det: usize) -> usize {
    let mut j = det + 1;
    while j < words.len() {
        if PHRASE_BREAKS.contains(&bare(words[j]).as_str()) {
            return j;
        }
        if !trailing_punct(words[j]).is_empty() {
            return j + 1;
        }
        j += 1;
    }
    j
}

fn insert_after_phrase(words: &[&str], end: usize, phrase: &str) -> String {
    let mut out: Vec<String> = words[..end].iter().map(|w| w.to_string()).collect();
    let mut carried = String::new();
    if let Some(last) = out.last_mut() {
        let p = trailing_punct(last).to_string();
        if !p.is_empty() {
            last.truncate(last.len() - p.len());
            carried = p;
        }
    }
    out.push(format!("{phrase}{carried}"));
    out.extend(words[end..].iter().map(|w| w.to_string()));
    out.join(" ")
}

/// "an apple on a table" + left third → "an apple on the left on a table".
pub fn spatial(text: &str, region: Option<Region>) -> String {
    let Some(region) = region else {
        return text.to_string();
    };
    let lower = text.to_ascii_lowercase();
    if lower.contains(region.phrase()) {
        return text.to_string();
    }
    let words: Vec<&str> = text.split_whitespace().collect();
    let Some(det) = words
        .iter()
        .position(|w| DETERMINERS.contains(&bare(w).as_str()) && trailing_punct(w).is_empty())
    else {
        return text.to_string();
    };
    if det + 1 >= words.len() {
        return text.to_string();
    }
    let end = phrase_end(&words, det);
    insert_after_phrase(&words, end, region.phrase())
}

fn noun_phrase_heads(text: &str) -> Vec<(usize, String)> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut heads = Vec::new();
    for (i, w) in words.iter().enumerate() {
        if DETERMINERS.contains(&bare(w).as_str()) && trailing_punct(w).is_empty() && i + 1 < words.len() {
            let end = phrase_end(&words, i);
            if end > i + 1 {
                heads.push((i, bare(words[end - 1])));
            }
        }
    }
    heads
}

/// "an apple" + hint "a girl tossed to me" → "an apple which a girl tossed to me".
pub fn temporal(text: &str, hint: Option<&TemporalHint>, previous: &[String]) -> String {
    let Some(hint) = hint else {
        return text.to_string();
    };
    let clause = format!("which {}", hint.clause.trim());
    if hint.clause.trim().is_empty() || text.to_ascii_lowercase().contains(&clause.to_ascii_lowercase()) {
        return text.to_string();
    }
    let words: Vec<&str> = text.split_whitespace().collect();
    let heads = noun_phrase_heads(text);
    let target = match &hint.object {
        Some(obj) => {
            let obj = obj.to_ascii_lowercase();
            heads.iter().find(|(_, h)| *h == obj).map(|(i, _)| *i)
        }
        None => previous.last().and_then(|prev| {
            let prev_heads: Vec<String> = noun_phrase_heads(prev).into_iter().map(|(_, h)| h).collect();
            heads.iter().find(|(_, h)| prev_heads.contains(h)).map(|(i, _)| *i)
        }),
    };
    match target {
        Some(det) => insert_after_phrase(&words, phrase_end(&words, det), &clause),
        None => text.to_string(),
    }
}

pub fn apply(kind: AugmenterKind, text: &str, ctx: &AugmentContext) -> String {
    match kind {
        AugmenterKind::Personhood => personhood(text),
        AugmenterKind::Spatial => spatial(text, ctx.region),
        AugmenterKind::Temporal => temporal(text, ctx.temporal.as_ref(), &ctx.previous_captions),
    }
}

/// Runs the chain in order and records every augmenter that ran.
///
/// The result is cut back to `max_words` if an augmenter lengthened it.
/// Falling below `min_words` is left for the caller to reject; nothing is
/// padded here.
pub fn augment_caption(
    caption: &Caption,
    chain: &[AugmenterKind],
    ctx: &AugmentContext,
    config: &PipelineConfig,
) -> (Caption, Vec<AugmenterKind>) {
    if chain.is_empty() {
        return (caption.clone(), Vec::new());
    }
    let mut text = caption.text.clone();
    for kind in chain {
        text = apply(*kind, &text, ctx);
    }
    let (text, cut) = truncate_to_bound(&text, config.min_words, config.max_words);
    let out = Caption {
        word_count: word_count(&text),
        text,
        truncated: caption.truncated || cut,
        ..caption.clone()
    };
    (out, chain.to_vec())
}
