//! Semantic see-through: a capture → sentence → image loop, plus the
//! round-trip consistency study that measures what survives the trip.
//!
//! The crate is split along the stages of that work:
//!
//! * [`pipeline`]: frames, captioner/generator ports, caption constraints,
//!   augmenters, the transform cycle and the session log.
//! * [`text_metrics`]: repeat collapsing, preprocessing, TF-IDF, word mover's
//!   similarity and sentence-embedding cosine.
//! * [`image_metrics`]: CIELAB histogram intersection, SIFT matching and
//!   learned-perceptual distance backends.
//! * [`stats`]: paired t-test, paired effect size, conditions and trimming.
//! * [`study`]: dataset ingestion, round trips and report assembly.
//! * [`remote`]: HTTP client for an external inference service.
//!
//! Scoring over pair lists goes through [`par`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise.

pub mod image_metrics;
pub mod par;
pub mod pipeline;
pub mod raster;
pub mod remote;
pub mod score;
pub mod stats;
pub mod study;
pub mod text_metrics;

pub use score::{MetricId, Orientation, ScoreFlag, SimilarityScore};
