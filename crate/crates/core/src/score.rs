use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The eight similarity measures of the round-trip study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Tfidf,
    Wmd,
    Use,
    Sbert,
    Hi,
    Sift,
    LpipsConv,
    LpipsTransformer,
}

impl MetricId {
    pub const TEXT: [MetricId; 4] = [MetricId::Tfidf, MetricId::Wmd, MetricId::Use, MetricId::Sbert];
    pub const VISUAL: [MetricId; 4] = [
        MetricId::Hi,
        MetricId::Sift,
        MetricId::LpipsConv,
        MetricId::LpipsTransformer,
    ];

    pub fn orientation(self) -> Orientation {
        match self {
            MetricId::LpipsConv | MetricId::LpipsTransformer => Orientation::LowerSimilar,
            _ => Orientation::HigherSimilar,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Tfidf => "tfidf",
            MetricId::Wmd => "wmd",
            MetricId::Use => "use",
            MetricId::Sbert => "sbert",
            MetricId::Hi => "hi",
            MetricId::Sift => "sift",
            MetricId::LpipsConv => "lpips_conv",
            MetricId::LpipsTransformer => "lpips_transformer",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::TEXT
            .iter()
            .chain(MetricId::VISUAL.iter())
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric id `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherSimilar,
    LowerSimilar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFlag {
    /// At least one side had nothing to compare (no keypoints, zero vector).
    Degenerate,
}

/// One scalar from one metric, serialized as
/// `{metric_id, value, orientation, flags}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub metric_id: MetricId,
    pub value: f64,
    pub orientation: Orientation,
    #[serde(default)]
    pub flags: Vec<ScoreFlag>,
}

impl SimilarityScore {
    pub fn new(metric_id: MetricId, value: f64) -> Self {
        SimilarityScore {
            metric_id,
            value,
            orientation: metric_id.orientation(),
            flags: Vec::new(),
        }
    }

    pub fn degenerate(metric_id: MetricId, value: f64) -> Self {
        SimilarityScore {
            flags: vec![ScoreFlag::Degenerate],
            ..SimilarityScore::new(metric_id, value)
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.flags.contains(&ScoreFlag::Degenerate)
    }
}
