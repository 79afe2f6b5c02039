//! Learned-perceptual distance backends.
//!
//! Real LPIPS needs trained network weights, which are served by the remote
//! inference service (see [`crate::remote`]). [`FilterBankPerceptual`] is a
//! fixed, untrained stand-in with the same shape: per-position unit-normalized
//! feature stacks, squared difference, spatial mean, averaged over layers. Its
//! values are not comparable to published LPIPS numbers.

use image::RgbImage;

use crate::pipeline::BackendError;
use crate::score::{MetricId, SimilarityScore};

pub trait PerceptualBackend: Send + Sync {
    /// `LpipsConv` or `LpipsTransformer`.
    fn metric_id(&self) -> MetricId;
    fn name(&self) -> String;
    /// Lower is more similar; 0 for identical inputs.
    fn distance(&self, a: &RgbImage, b: &RgbImage) -> Result<f64, BackendError>;
}

impl<T: PerceptualBackend + ?Sized> PerceptualBackend for std::sync::Arc<T> {
    fn metric_id(&self) -> MetricId {
        (**self).metric_id()
    }
    fn name(&self) -> String {
        (**self).name()
    }
    fn distance(&self, a: &RgbImage, b: &RgbImage) -> Result<f64, BackendError> {
        (**self).distance(a, b)
    }
}

pub fn perceptual_score(backend: &dyn PerceptualBackend, a: &RgbImage, b: &RgbImage) -> Result<SimilarityScore, BackendError> {
    Ok(SimilarityScore::new(backend.metric_id(), backend.distance(a, b)?))
}

/// Channel-major feature map.
struct Features {
    w: usize,
    h: usize,
    channels: Vec<Vec<f32>>,
}

impl Features {
    fn from_rgb(img: &RgbImage) -> Features {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut channels: Vec<Vec<f32>> = (0..3).map(|_| Vec::with_capacity(w * h)).collect();
        for p in img.pixels() {
            for c in 0..3 {
                channels[c].push(p[c] as f32 / 127.5 - 1.0);
            }
        }
        Features { w, h, channels }
    }

    fn pool2(&self) -> Features {
        let (w, h) = ((self.w / 2).max(1), (self.h / 2).max(1));
        let channels = self
            .channels
            .iter()
            .map(|ch| {
                let mut out = Vec::with_capacity(w * h);
                for y in 0..h {
                    for x in 0..w {
                        let mut acc = 0.0;
                        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            let xx = (2 * x + dx).min(self.w - 1);
                            let yy = (2 * y + dy).min(self.h - 1);
                            acc += ch[yy * self.w + xx];
                        }
                        out.push(acc / 4.0);
                    }
                }
                out
            })
            .collect();
        Features { w, h, channels }
    }

    /// Unit-normalize the channel vector at every position.
    fn normalize(mut self) -> Features {
        for i in 0..self.w * self.h {
            let n = self.channels.iter().map(|c| c[i] * c[i]).sum::<f32>().sqrt() + 1e-10;
            for c in self.channels.iter_mut() {
                c[i] /= n;
            }
        }
        self
    }
}

/// Squared difference summed over channels, averaged over positions.
fn layer_distance(a: &Features, b: &Features) -> f64 {
    let n = a.w * a.h;
    let mut total = 0.0f64;
    for i in 0..n {
        let d: f32 = a.channels.iter().zip(&b.channels).map(|(ca, cb)| (ca[i] - cb[i]).powi(2)).sum();
        total += d as f64;
    }
    total / n.max(1) as f64
}

/// Fixed 3×3 filters per colour channel: mean, x/y gradient, Laplacian.
fn conv_layer(input: &Features) -> Features {
    const KERNELS: [[f32; 9]; 4] = [
        [1.0 / 9.0; 9],
        [-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0],
        [-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0],
        [0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0],
    ];
    let (w, h) = (input.w, input.h);
    let mut channels = Vec::new();
    for ch in input.channels.iter().take(3) {
        for k in &KERNELS {
            let mut out = vec![0f32; w * h];
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for (ki, kv) in k.iter().enumerate() {
                        let xx = (x as isize + (ki % 3) as isize - 1).clamp(0, w as isize - 1) as usize;
                        let yy = (y as isize + (ki / 3) as isize - 1).clamp(0, h as isize - 1) as usize;
                        acc += kv * ch[yy * w + xx];
                    }
                    // rectify like a ReLU stack, keeping sign information in
                    // separate channels
                    out[y * w + x] = acc;
                }
            }
            channels.push(out.iter().map(|v| v.max(0.0)).collect());
            channels.push(out.iter().map(|v| (-v).max(0.0)).collect());
        }
    }
    Features { w, h, channels }
}

/// Non-overlapping `patch`×`patch` tokens; each token is the mean-centred,
/// 4×4-pooled patch content of every colour channel.
fn patch_tokens(input: &Features, patch: usize) -> Features {
    let (tw, th) = ((input.w / patch).max(1), (input.h / patch).max(1));
    let cell = (patch / 4).max(1);
    let mut channels = vec![vec![0f32; tw * th]; 3 * 16];
    for ty in 0..th {
        for tx in 0..tw {
            for (c, ch) in input.channels.iter().enumerate().take(3) {
                let mut cells = [0f32; 16];
                for (ci, cv) in cells.iter_mut().enumerate() {
                    let (cx, cy) = (ci % 4, ci / 4);
                    let mut acc = 0.0;
                    for dy in 0..cell {
                        for dx in 0..cell {
                            let x = (tx * patch + cx * cell + dx).min(input.w - 1);
                            let y = (ty * patch + cy * cell + dy).min(input.h - 1);
                            acc += ch[y * input.w + x];
                        }
                    }
                    *cv = acc / (cell * cell) as f32;
                }
                let mean = cells.iter().sum::<f32>() / 16.0;
                for (ci, cv) in cells.iter().enumerate() {
                    channels[c * 16 + ci][ty * tw + tx] = cv - mean;
                }
            }
        }
    }
    Features { w: tw, h: th, channels }
}

/// Deterministic, untrained LPIPS-shaped distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterBankPerceptual {
    metric: MetricId,
    layers: usize,
}

impl FilterBankPerceptual {
    /// Multi-scale 3×3 filter bank, standing in for the convolutional variant.
    pub fn conv() -> Self {
        FilterBankPerceptual { metric: MetricId::LpipsConv, layers: 4 }
    }

    /// Patch-token features at several patch sizes, standing in for the
    /// transformer variant.
    pub fn transformer() -> Self {
        FilterBankPerceptual { metric: MetricId::LpipsTransformer, layers: 3 }
    }

    pub fn for_metric(metric: MetricId) -> Option<Self> {
        match metric {
            MetricId::LpipsConv => Some(Self::conv()),
            MetricId::LpipsTransformer => Some(Self::transformer()),
            _ => None,
        }
    }

    fn layers_of(&self, img: &RgbImage) -> Vec<Features> {
        let base = Features::from_rgb(img);
        match self.metric {
            MetricId::LpipsTransformer => (0..self.layers).map(|i| patch_tokens(&base, 8 << i).normalize()).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.layers);
                let mut cur = base;
                for _ in 0..self.layers {
                    out.push(conv_layer(&cur).normalize());
                    cur = cur.pool2();
                }
                out
            }
        }
    }
}

impl PerceptualBackend for FilterBankPerceptual {
    fn metric_id(&self) -> MetricId {
        self.metric
    }

    fn name(&self) -> String {
        match self.metric {
            MetricId::LpipsTransformer => "filterbank-patch (untrained stand-in)".into(),
            _ => "filterbank-conv (untrained stand-in)".into(),
        }
    }

    fn distance(&self, a: &RgbImage, b: &RgbImage) -> Result<f64, BackendError> {
        if a.dimensions() != b.dimensions() {
            return Err(BackendError::Failure(format!(
                "perceptual distance needs equal sizes, got {:?} and {:?}",
                a.dimensions(),
                b.dimensions()
            )));
        }
        let (la, lb) = (self.layers_of(a), self.layers_of(b));
        let d: f64 = la.iter().zip(&lb).map(|(x, y)| layer_distance(x, y)).sum();
        Ok(d / la.len() as f64)
    }
}
