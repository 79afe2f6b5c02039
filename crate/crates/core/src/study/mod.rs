//! The round-trip consistency study: ingest, round trip, paired and random
//! conditions, text and visual scoring, report.

pub mod backends;
pub mod dataset;
pub mod report;
pub mod roundtrip;
pub mod scoring;

use std::path::Path;

use thiserror::Error;

pub use backends::{Backends, BackendsConfig, BackendsError};
pub use dataset::{ingest_dataset, Dataset, StudyImage};
pub use report::{MetricRow, RowStatus, ScoreRecord, StudyReport};
pub use roundtrip::{run_roundtrip, DroppedItem, RoundTrip, RoundTripRun};
pub use scoring::{score_text, score_visual, MetricOutcome, MetricScores};

use crate::par::Parallelism;
use crate::pipeline::{ConfigError, PipelineConfig};
use crate::stats::{build_conditions, Condition, ConditionSet, StatsError};

pub const REPORT_FILE: &str = "report.json";
pub const SCORES_FILE: &str = "scores.csv";
pub const PLOTS_DIR: &str = "plots";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudySettings {
    pub size: u32,
    pub steps: u32,
    pub seed: u64,
    pub mode: Parallelism,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings { size: 256, steps: 4, seed: 0, mode: Parallelism::Parallel }
    }
}

impl StudySettings {
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            inference_steps: self.steps,
            study_resolution: self.size,
            ..PipelineConfig::study(self.seed)
        }
    }
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot build conditions from {items} surviving items: {source}")]
    Conditions { items: usize, source: StatsError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub struct StudyOutcome {
    pub report: StudyReport,
    pub scores: Vec<ScoreRecord>,
    pub run: RoundTripRun,
    pub paired: ConditionSet,
    pub random: ConditionSet,
}

/// Scores one metric's aligned lists into `(item_id, metric, condition,
/// value)` records, paired rows first.
fn records(outcome: &MetricOutcome, trips: &[RoundTrip]) -> Vec<ScoreRecord> {
    let Ok(s) = outcome else { return Vec::new() };
    let mut out = Vec::with_capacity(2 * s.paired.len());
    for (condition, values) in [(Condition::Paired, &s.paired), (Condition::Random, &s.random)] {
        for (k, v) in values.iter().enumerate() {
            out.push(ScoreRecord {
                item_id: trips[s.item_index[k]].item_id.clone(),
                metric_id: s.metric_id,
                condition,
                value: *v,
            });
        }
    }
    out
}

/// Full study over an ingested dataset. Deterministic for fixed inputs,
/// settings and backends, whatever the parallelism.
pub fn run_study(dataset: &Dataset, settings: &StudySettings, backends: &Backends) -> Result<StudyOutcome, StudyError> {
    let config = settings.pipeline_config();
    config.validate()?;
    // inputs and outputs must share a resolution for the visual metrics
    let images: Vec<StudyImage> = dataset
        .images
        .iter()
        .map(|i| StudyImage {
            item_id: i.item_id.clone(),
            image: crate::raster::center_crop_resize(&i.image, settings.size),
        })
        .collect();
    let run = run_roundtrip(&images, &config, backends.captioner.as_ref(), backends.generator.as_ref(), settings.mode);
    let (paired, random) = build_conditions(&run.items, &run.items, settings.seed)
        .map_err(|source| StudyError::Conditions { items: run.items.len(), source })?;

    let text = score_text(&run.items, &paired, &random, backends, settings.mode);
    let visual = score_visual(&run.items, &paired, &random, backends, settings.mode);

    let mut scores = Vec::new();
    for o in text.iter().chain(&visual) {
        scores.extend(records(o, &run.items));
    }
    let report = StudyReport {
        text: text.iter().map(report::metric_row).collect(),
        visual: visual.iter().map(report::metric_row).collect(),
        distributions: text.iter().chain(&visual).filter_map(report::distribution).collect(),
        snapshot: report::Snapshot {
            images_ingested: dataset.images.len(),
            images_skipped: dataset.skipped.len(),
            items_scored: run.items.len(),
            drop_count: run.drop_count(),
            dropped: run.dropped.clone(),
            generation_seed: settings.seed,
            condition_seed: settings.seed,
            inference_steps: config.inference_steps,
            resolution: config.output_resolution(),
            min_words: config.min_words,
            max_words: config.max_words,
            bins: backends.bins,
            trimming: "values above the 99th percentile removed per condition, plot arrays only".into(),
            backends: backends.snapshot.clone(),
        },
    };
    Ok(StudyOutcome { report, scores, run, paired, random })
}

/// Writes `report.json`, `scores.csv` and `plots/` into `out`.
pub fn write_outputs(outcome: &StudyOutcome, out: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(REPORT_FILE), outcome.report.to_json())?;
    report::write_scores_csv(&out.join(SCORES_FILE), &outcome.scores)?;
    report::write_plots(&out.join(PLOTS_DIR), &outcome.report.distributions)
}
