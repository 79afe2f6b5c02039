//! Visual similarity between an original and a generated image.

pub mod histogram;
pub mod lab;
pub mod perceptual;
pub mod sift;

pub use histogram::{histogram_intersection, ColorHistogram, DEFAULT_BINS};
pub use lab::{rgb_to_lab, srgb_to_lab, Lab, LabImage};
pub use perceptual::{perceptual_score, FilterBankPerceptual, PerceptualBackend};
pub use sift::{detect, match_score, sift_similarity, KeypointSet, SiftParams};
