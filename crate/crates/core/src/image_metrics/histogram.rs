use image::RgbImage;

use crate::score::{MetricId, SimilarityScore};

use super::lab::{rgb_to_lab, LabImage};

/// Default bins per CIELAB axis.
pub const DEFAULT_BINS: usize = 8;

/// Normalized `bins`³ histogram over (L, a, b) with L in [0, 100] and a, b in
/// [−128, 127].
#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram {
    pub bins_per_axis: usize,
    pub bins: Vec<f64>,
}

fn bin_index(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = (value - lo) / (hi - lo);
    ((t * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

impl ColorHistogram {
    pub fn from_lab(lab: &LabImage, bins_per_axis: usize) -> Self {
        assert!(bins_per_axis > 0, "bins_per_axis must be positive");
        let b = bins_per_axis;
        let mut counts = vec![0u64; b * b * b];
        for p in &lab.pixels {
            let li = bin_index(p.l, 0.0, 100.0, b);
            let ai = bin_index(p.a, -128.0, 127.0, b);
            let bi = bin_index(p.b, -128.0, 127.0, b);
            counts[(li * b + ai) * b + bi] += 1;
        }
        let total = lab.pixels.len().max(1) as f64;
        ColorHistogram {
            bins_per_axis,
            bins: counts.into_iter().map(|c| c as f64 / total).collect(),
        }
    }

    pub fn from_rgb(image: &RgbImage, bins_per_axis: usize) -> Self {
        ColorHistogram::from_lab(&rgb_to_lab(image), bins_per_axis)
    }

    /// Σ min(Ha, Hb), in [0, 1].
    pub fn intersection(&self, other: &ColorHistogram) -> f64 {
        assert_eq!(self.bins_per_axis, other.bins_per_axis, "histograms binned differently");
        let s: f64 = self.bins.iter().zip(&other.bins).map(|(a, b)| a.min(*b)).sum();
        s.clamp(0.0, 1.0)
    }
}

pub fn histogram_intersection(a: &RgbImage, b: &RgbImage, bins_per_axis: usize) -> SimilarityScore {
    let ha = ColorHistogram::from_rgb(a, bins_per_axis);
    let hb = ColorHistogram::from_rgb(b, bins_per_axis);
    SimilarityScore::new(MetricId::Hi, ha.intersection(&hb))
}
