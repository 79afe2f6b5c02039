use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::score::{MetricId, Orientation};
use crate::stats::{cohens_d, paired_t_test, trim_p99, Condition, StatsError};

use super::roundtrip::DroppedItem;
use super::scoring::MetricOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Skipped,
}

/// One table row. Leading columns follow the published layout:
/// Ave_P, Std_P, Ave_R, Std_R, t, p, d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric_id: MetricId,
    pub ave_p: Option<f64>,
    pub std_p: Option<f64>,
    pub ave_r: Option<f64>,
    pub std_r: Option<f64>,
    /// `None` when the differences have zero variance.
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub d: Option<f64>,
    pub status: RowStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
    pub orientation: Orientation,
    pub backend: String,
    pub n: usize,
    pub dof: usize,
    pub excluded: usize,
    pub degenerate_paired: usize,
    pub degenerate_random: usize,
    #[serde(default)]
    pub zero_variance: bool,
}

impl MetricRow {
    fn skipped(metric_id: MetricId, reason: String) -> Self {
        MetricRow {
            metric_id,
            ave_p: None,
            std_p: None,
            ave_r: None,
            std_r: None,
            t: None,
            p: None,
            d: None,
            status: RowStatus::Skipped,
            skip_reason: Some(reason),
            orientation: metric_id.orientation(),
            backend: String::new(),
            n: 0,
            dof: 0,
            excluded: 0,
            degenerate_paired: 0,
            degenerate_random: 0,
            zero_variance: false,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }
}

/// Builds a row from untrimmed scores. Trimming never touches this path.
pub fn metric_row(outcome: &MetricOutcome) -> MetricRow {
    let s = match outcome {
        Ok(s) => s,
        Err((metric, reason)) => return MetricRow::skipped(*metric, reason.clone()),
    };
    let mut row = MetricRow {
        status: RowStatus::Ok,
        skip_reason: None,
        backend: s.backend.clone(),
        n: s.paired.len(),
        excluded: s.excluded.len(),
        degenerate_paired: s.degenerate_paired,
        degenerate_random: s.degenerate_random,
        ..MetricRow::skipped(s.metric_id, String::new())
    };
    match (paired_t_test(&s.paired, &s.random), cohens_d(&s.paired, &s.random)) {
        (Ok(t), Ok(d)) => {
            row.ave_p = Some(t.mean_paired);
            row.std_p = Some(t.std_paired);
            row.ave_r = Some(t.mean_random);
            row.std_r = Some(t.std_random);
            row.t = Some(t.t_value);
            row.p = Some(t.p_value);
            row.d = Some(d.d);
            row.dof = t.dof;
        }
        (Err(StatsError::ZeroVariance { p_value, .. }), _) => {
            row.ave_p = Some(crate::stats::mean(&s.paired));
            row.std_p = Some(crate::stats::sample_std(&s.paired));
            row.ave_r = Some(crate::stats::mean(&s.random));
            row.std_r = Some(crate::stats::sample_std(&s.random));
            row.p = Some(p_value);
            row.dof = s.paired.len() - 1;
            row.zero_variance = true;
        }
        (Err(e), _) | (_, Err(e)) => {
            row.status = RowStatus::Skipped;
            row.skip_reason = Some(e.to_string());
        }
    }
    row
}

/// Plot arrays for one metric, each condition trimmed separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub metric_id: MetricId,
    pub orientation: Orientation,
    pub paired: Vec<f64>,
    pub random: Vec<f64>,
}

pub fn distribution(outcome: &MetricOutcome) -> Option<Distribution> {
    let s = outcome.as_ref().ok()?;
    Some(Distribution {
        metric_id: s.metric_id,
        orientation: s.metric_id.orientation(),
        paired: trim_p99(&s.paired),
        random: trim_p99(&s.random),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub images_ingested: usize,
    pub images_skipped: usize,
    pub items_scored: usize,
    pub drop_count: usize,
    pub dropped: Vec<DroppedItem>,
    pub generation_seed: u64,
    pub condition_seed: u64,
    pub inference_steps: u32,
    pub resolution: u32,
    pub min_words: usize,
    pub max_words: usize,
    pub bins: usize,
    /// Plot arrays drop values above the 99th percentile of their own
    /// condition; statistics use every score.
    pub trimming: String,
    pub backends: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub text: Vec<MetricRow>,
    pub visual: Vec<MetricRow>,
    pub distributions: Vec<Distribution>,
    pub snapshot: Snapshot,
}

impl StudyReport {
    pub fn row(&self, metric: MetricId) -> Option<&MetricRow> {
        self.text.iter().chain(&self.visual).find(|r| r.metric_id == metric)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRecord {
    pub item_id: String,
    pub metric_id: MetricId,
    pub condition: Condition,
    pub value: f64,
}

pub fn write_scores_csv(path: &Path, records: &[ScoreRecord]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "item_id,metric_id,condition,value")?;
    for r in records {
        let id = if r.item_id.contains([',', '"', '\n']) {
            format!("\"{}\"", r.item_id.replace('"', "\"\""))
        } else {
            r.item_id.clone()
        };
        writeln!(f, "{id},{},{},{}", r.metric_id, r.condition.as_str(), r.value)?;
    }
    f.flush()
}

pub const RENDER_SCRIPT: &str = include_str!("render_plots.py");

pub fn write_plots(dir: &Path, distributions: &[Distribution]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for d in distributions {
        let mut json = serde_json::to_string_pretty(d).expect("distribution serializes");
        json.push('\n');
        std::fs::write(dir.join(format!("{}.json", d.metric_id)), json)?;
    }
    std::fs::write(dir.join("render_plots.py"), RENDER_SCRIPT)
}
