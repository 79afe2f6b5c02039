//! Scale-invariant keypoints and descriptors (difference-of-Gaussians
//! detector, 4×4×8 gradient-orientation descriptor) plus a symmetric
//! ratio-test match score.
//!
//! Follows Lowe's method with OpenCV's default parameters, without the
//! initial 2× upsampling.

use image::RgbImage;

use crate::score::{MetricId, SimilarityScore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiftParams {
    pub octave_layers: usize,
    pub sigma: f32,
    pub contrast_threshold: f32,
    pub edge_threshold: f32,
    /// Keep at most this many keypoints, strongest response first.
    pub max_keypoints: Option<usize>,
    pub ratio: f32,
}

impl Default for SiftParams {
    fn default() -> Self {
        SiftParams {
            octave_layers: 3,
            sigma: 1.6,
            contrast_threshold: 0.04,
            edge_threshold: 10.0,
            max_keypoints: Some(2000),
            ratio: 0.75,
        }
    }
}

pub const DESCRIPTOR_LEN: usize = 128;
const DESCR_WIDTH: usize = 4;
const DESCR_BINS: usize = 8;
const ORI_BINS: usize = 36;
const ORI_PEAK_RATIO: f32 = 0.8;
const ORI_SIGMA_FACTOR: f32 = 1.5;
const DESCR_SCALE_FACTOR: f32 = 3.0;
const DESCR_MAG_THRESHOLD: f32 = 0.2;
const IMAGE_BORDER: usize = 5;
const MAX_INTERP_STEPS: usize = 5;
const ASSUMED_INPUT_BLUR: f32 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    /// Position in input-image pixels.
    pub x: f32,
    pub y: f32,
    /// Blur level in input-image pixels.
    pub scale: f32,
    /// Radians.
    pub orientation: f32,
    pub response: f32,
    /// L2-normalized.
    pub descriptor: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeypointSet {
    pub keypoints: Vec<Keypoint>,
}

impl KeypointSet {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Gray {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Gray {
    fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }

    fn from_rgb(img: &RgbImage) -> Gray {
        Gray {
            w: img.width() as usize,
            h: img.height() as usize,
            data: img
                .pixels()
                .map(|p| (0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32) / 255.0)
                .collect(),
        }
    }

    fn downsample(&self) -> Gray {
        let w = (self.w / 2).max(1);
        let h = (self.h / 2).max(1);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(self.at((2 * x).min(self.w - 1), (2 * y).min(self.h - 1)));
            }
        }
        Gray { w, h, data }
    }

    fn blur(&self, sigma: f32) -> Gray {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil().max(1.0) as isize;
        let kernel: Vec<f32> = (-radius..=radius)
            .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f32 = kernel.iter().sum();
        let kernel: Vec<f32> = kernel.into_iter().map(|k| k / norm).collect();
        let (w, h) = (self.w as isize, self.h as isize);
        let reflect = |i: isize, n: isize| -> usize {
            let mut i = i;
            if n == 1 {
                return 0;
            }
            while i < 0 || i >= n {
                i = if i < 0 { -i - 1 } else { 2 * n - i - 1 };
            }
            i as usize
        };
        let mut tmp = vec![0f32; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    acc += kv * self.data[y as usize * self.w + reflect(x + k as isize - radius, w)];
                }
                tmp[(y * w + x) as usize] = acc;
            }
        }
        let mut out = vec![0f32; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    acc += kv * tmp[reflect(y + k as isize - radius, h) * self.w + x as usize];
                }
                out[(y * w + x) as usize] = acc;
            }
        }
        Gray { w: self.w, h: self.h, data: out }
    }

    fn sub(&self, other: &Gray) -> Gray {
        Gray {
            w: self.w,
            h: self.h,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

struct Octave {
    gauss: Vec<Gray>,
    dog: Vec<Gray>,
}

fn build_pyramid(base: &Gray, params: &SiftParams) -> Vec<Octave> {
    let s = params.octave_layers;
    let min_side = base.w.min(base.h) as f32;
    let n_octaves = ((min_side.log2() - 2.0).floor() as i32).max(1) as usize;
    let k = 2f32.powf(1.0 / s as f32);
    let increments: Vec<f32> = (0..s + 3)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                let prev = params.sigma * k.powi(i as i32 - 1);
                let total = prev * k;
                (total * total - prev * prev).sqrt()
            }
        })
        .collect();
    let mut octaves: Vec<Octave> = Vec::with_capacity(n_octaves);
    for o in 0..n_octaves {
        let first = if o == 0 {
            let diff = (params.sigma * params.sigma - ASSUMED_INPUT_BLUR * ASSUMED_INPUT_BLUR).max(0.01).sqrt();
            base.blur(diff)
        } else {
            octaves[o - 1].gauss[s].downsample()
        };
        if first.w < 2 * IMAGE_BORDER + 3 || first.h < 2 * IMAGE_BORDER + 3 {
            break;
        }
        let mut gauss = vec![first];
        for inc in increments.iter().skip(1) {
            let next = gauss.last().unwrap().blur(*inc);
            gauss.push(next);
        }
        let dog = gauss.windows(2).map(|w| w[1].sub(&w[0])).collect();
        octaves.push(Octave { gauss, dog });
    }
    octaves
}

fn is_extremum(dog: &[Gray], layer: usize, x: usize, y: usize) -> bool {
    let v = dog[layer].at(x, y);
    let mut is_max = true;
    let mut is_min = true;
    for (l, img) in dog.iter().enumerate().take(layer + 2).skip(layer - 1) {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                if l == layer && yy == y && xx == x {
                    continue;
                }
                let n = img.at(xx, yy);
                is_max &= v >= n;
                is_min &= v <= n;
                if !is_max && !is_min {
                    return false;
                }
            }
        }
    }
    // plateaus are not extrema
    (is_max && v > 0.0) || (is_min && v < 0.0)
}

fn solve3(h: [[f32; 3]; 3], g: [f32; 3]) -> Option<[f32; 3]> {
    let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
    if det.abs() < 1e-12 {
        return None;
    }
    let col = |c: usize| -> f32 {
        let mut m = h;
        for r in 0..3 {
            m[r][c] = g[r];
        }
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    Some([col(0) / det, col(1) / det, col(2) / det])
}

struct Refined {
    x: f32,
    y: f32,
    layer: usize,
    layer_offset: f32,
    response: f32,
}

fn refine(dog: &[Gray], s: usize, mut x: usize, mut y: usize, mut layer: usize, params: &SiftParams) -> Option<Refined> {
    let (w, h) = (dog[0].w, dog[0].h);
    let mut offset = [0f32; 3];
    let mut grad = [0f32; 3];
    let mut converged = false;
    for _ in 0..MAX_INTERP_STEPS {
        let d = |l: usize, xx: usize, yy: usize| dog[l].at(xx, yy);
        let v = d(layer, x, y);
        grad = [
            0.5 * (d(layer, x + 1, y) - d(layer, x - 1, y)),
            0.5 * (d(layer, x, y + 1) - d(layer, x, y - 1)),
            0.5 * (d(layer + 1, x, y) - d(layer - 1, x, y)),
        ];
        let dxx = d(layer, x + 1, y) + d(layer, x - 1, y) - 2.0 * v;
        let dyy = d(layer, x, y + 1) + d(layer, x, y - 1) - 2.0 * v;
        let dss = d(layer + 1, x, y) + d(layer - 1, x, y) - 2.0 * v;
        let dxy = 0.25 * (d(layer, x + 1, y + 1) - d(layer, x - 1, y + 1) - d(layer, x + 1, y - 1) + d(layer, x - 1, y - 1));
        let dxs = 0.25 * (d(layer + 1, x + 1, y) - d(layer + 1, x - 1, y) - d(layer - 1, x + 1, y) + d(layer - 1, x - 1, y));
        let dys = 0.25 * (d(layer + 1, x, y + 1) - d(layer + 1, x, y - 1) - d(layer - 1, x, y + 1) + d(layer - 1, x, y - 1));
        let hess = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
        let sol = solve3(hess, grad)?;
        offset = [-sol[0], -sol[1], -sol[2]];
        if offset.iter().all(|o| o.abs() < 0.5) {
            converged = true;
            break;
        }
        if offset.iter().any(|o| o.abs() > (i32::MAX / 3) as f32) {
            return None;
        }
        let nx = x as i64 + offset[0].round() as i64;
        let ny = y as i64 + offset[1].round() as i64;
        let nl = layer as i64 + offset[2].round() as i64;
        let b = IMAGE_BORDER as i64;
        if nl < 1 || nl > s as i64 || nx < b || nx >= w as i64 - b || ny < b || ny >= h as i64 - b {
            return None;
        }
        x = nx as usize;
        y = ny as usize;
        layer = nl as usize;
    }
    if !converged {
        return None;
    }
    let v = dog[layer].at(x, y);
    let contrast = v + 0.5 * (grad[0] * offset[0] + grad[1] * offset[1] + grad[2] * offset[2]);
    if contrast.abs() * (s as f32) < params.contrast_threshold {
        return None;
    }
    // principal curvature ratio
    let d = |xx: usize, yy: usize| dog[layer].at(xx, yy);
    let dxx = d(x + 1, y) + d(x - 1, y) - 2.0 * v;
    let dyy = d(x, y + 1) + d(x, y - 1) - 2.0 * v;
    let dxy = 0.25 * (d(x + 1, y + 1) - d(x - 1, y + 1) - d(x + 1, y - 1) + d(x - 1, y - 1));
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    let r = params.edge_threshold;
    if det <= 0.0 || tr * tr * r >= (r + 1.0) * (r + 1.0) * det {
        return None;
    }
    Some(Refined {
        x: x as f32 + offset[0],
        y: y as f32 + offset[1],
        layer,
        layer_offset: offset[2],
        response: contrast.abs(),
    })
}

fn gradient(img: &Gray, x: usize, y: usize) -> (f32, f32) {
    let dx = img.at(x + 1, y) - img.at(x - 1, y);
    let dy = img.at(x, y + 1) - img.at(x, y - 1);
    ((dx * dx + dy * dy).sqrt(), dy.atan2(dx))
}

fn orientations(img: &Gray, x: f32, y: f32, sigma_oct: f32) -> Vec<f32> {
    let radius = (3.0 * ORI_SIGMA_FACTOR * sigma_oct).round() as i64;
    let weight_scale = -1.0 / (2.0 * (ORI_SIGMA_FACTOR * sigma_oct).powi(2));
    let (cx, cy) = (x.round() as i64, y.round() as i64);
    let mut hist = [0f32; ORI_BINS];
    for dy in -radius..=radius {
        let yy = cy + dy;
        if yy <= 0 || yy >= img.h as i64 - 1 {
            continue;
        }
        for dx in -radius..=radius {
            let xx = cx + dx;
            if xx <= 0 || xx >= img.w as i64 - 1 {
                continue;
            }
            let (mag, ang) = gradient(img, xx as usize, yy as usize);
            let w = ((dx * dx + dy * dy) as f32 * weight_scale).exp();
            let bin = ((ang.rem_euclid(std::f32::consts::TAU)) * ORI_BINS as f32 / std::f32::consts::TAU).round() as usize % ORI_BINS;
            hist[bin] += w * mag;
        }
    }
    let smooth: Vec<f32> = (0..ORI_BINS)
        .map(|i| {
            let at = |o: isize| hist[(i as isize + o).rem_euclid(ORI_BINS as isize) as usize];
            (at(-2) + at(2)) * (1.0 / 16.0) + (at(-1) + at(1)) * (4.0 / 16.0) + at(0) * (6.0 / 16.0)
        })
        .collect();
    let max = smooth.iter().cloned().fold(0.0, f32::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..ORI_BINS {
        let l = smooth[(i + ORI_BINS - 1) % ORI_BINS];
        let r = smooth[(i + 1) % ORI_BINS];
        let c = smooth[i];
        if c > l && c > r && c >= ORI_PEAK_RATIO * max {
            let shift = 0.5 * (l - r) / (l - 2.0 * c + r);
            let bin = (i as f32 + shift).rem_euclid(ORI_BINS as f32);
            out.push(bin * std::f32::consts::TAU / ORI_BINS as f32);
        }
    }
    out
}

fn descriptor(img: &Gray, x: f32, y: f32, sigma_oct: f32, angle: f32) -> Vec<f32> {
    let d = DESCR_WIDTH as f32;
    let n = DESCR_BINS as f32;
    let hist_width = DESCR_SCALE_FACTOR * sigma_oct;
    let radius = ((hist_width * std::f32::consts::SQRT_2 * (d + 1.0) * 0.5).round() as i64)
        .min(((img.w * img.w + img.h * img.h) as f32).sqrt() as i64);
    let (cos_t, sin_t) = (angle.cos() / hist_width, angle.sin() / hist_width);
    let exp_scale = -1.0 / (d * d * 0.5);
    let (cx, cy) = (x.round() as i64, y.round() as i64);
    let mut hist = vec![0f32; (DESCR_WIDTH + 2) * (DESCR_WIDTH + 2) * (DESCR_BINS + 2)];
    let idx = |r: usize, c: usize, o: usize| (r * (DESCR_WIDTH + 2) + c) * (DESCR_BINS + 2) + o;
    for i in -radius..=radius {
        for j in -radius..=radius {
            // rotate the offset by -angle (y points down, like the gradient)
            let c_rot = j as f32 * cos_t + i as f32 * sin_t;
            let r_rot = -(j as f32) * sin_t + i as f32 * cos_t;
            let rbin = r_rot + d / 2.0 - 0.5;
            let cbin = c_rot + d / 2.0 - 0.5;
            if rbin <= -1.0 || rbin >= d || cbin <= -1.0 || cbin >= d {
                continue;
            }
            let (yy, xx) = (cy + i, cx + j);
            if yy <= 0 || yy >= img.h as i64 - 1 || xx <= 0 || xx >= img.w as i64 - 1 {
                continue;
            }
            let (mag, ang) = gradient(img, xx as usize, yy as usize);
            let w = ((c_rot * c_rot + r_rot * r_rot) * exp_scale).exp();
            let obin = ((ang - angle).rem_euclid(std::f32::consts::TAU)) * n / std::f32::consts::TAU;
            let v = mag * w;
            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (dr, dc, dobin) = (rbin - r0, cbin - c0, obin - o0);
            let (r0, c0) = (r0 as isize, c0 as isize);
            let o0 = (o0 as usize) % DESCR_BINS;
            for (ri, rw) in [(0isize, 1.0 - dr), (1, dr)] {
                for (ci, cw) in [(0isize, 1.0 - dc), (1, dc)] {
                    for (oi, ow) in [(0usize, 1.0 - dobin), (1, dobin)] {
                        let r = (r0 + ri + 1) as usize;
                        let c = (c0 + ci + 1) as usize;
                        hist[idx(r, c, o0 + oi)] += v * rw * cw * ow;
                    }
                }
            }
        }
    }
    let mut out = Vec::with_capacity(DESCRIPTOR_LEN);
    for r in 0..DESCR_WIDTH {
        for c in 0..DESCR_WIDTH {
            // wrap the circular orientation overflow bin
            let wrap = hist[idx(r + 1, c + 1, DESCR_BINS)];
            for o in 0..DESCR_BINS {
                let mut v = hist[idx(r + 1, c + 1, o)];
                if o == 0 {
                    v += wrap;
                }
                out.push(v);
            }
        }
    }
    let norm = out.iter().map(|v| v * v).sum::<f32>().sqrt();
    if norm > 0.0 {
        let cap = DESCR_MAG_THRESHOLD * norm;
        out.iter_mut().for_each(|v| *v = v.min(cap));
        let norm2 = out.iter().map(|v| v * v).sum::<f32>().sqrt().max(f32::EPSILON);
        out.iter_mut().for_each(|v| *v /= norm2);
    }
    out
}

pub fn detect(image: &RgbImage, params: &SiftParams) -> KeypointSet {
    let gray = Gray::from_rgb(image);
    if gray.w < 2 * IMAGE_BORDER + 3 || gray.h < 2 * IMAGE_BORDER + 3 {
        return KeypointSet::default();
    }
    let s = params.octave_layers;
    let threshold = 0.5 * params.contrast_threshold / s as f32;
    let mut keypoints = Vec::new();
    for (o, octave) in build_pyramid(&gray, params).iter().enumerate() {
        let scale = 2f32.powi(o as i32);
        let (w, h) = (octave.dog[0].w, octave.dog[0].h);
        for layer in 1..=s {
            for y in IMAGE_BORDER..h - IMAGE_BORDER {
                for x in IMAGE_BORDER..w - IMAGE_BORDER {
                    if octave.dog[layer].at(x, y).abs() <= threshold || !is_extremum(&octave.dog, layer, x, y) {
                        continue;
                    }
                    let Some(kp) = refine(&octave.dog, s, x, y, layer, params) else {
                        continue;
                    };
                    let sigma_oct = params.sigma * 2f32.powf((kp.layer as f32 + kp.layer_offset) / s as f32);
                    let img = &octave.gauss[kp.layer];
                    for angle in orientations(img, kp.x, kp.y, sigma_oct) {
                        keypoints.push(Keypoint {
                            x: kp.x * scale,
                            y: kp.y * scale,
                            scale: sigma_oct * scale,
                            orientation: angle,
                            response: kp.response,
                            descriptor: descriptor(img, kp.x, kp.y, sigma_oct, angle),
                        });
                    }
                }
            }
        }
    }
    // drop exact duplicates reached from neighbouring start pixels
    keypoints.sort_by(|a, b| {
        (a.x, a.y, a.scale, a.orientation)
            .partial_cmp(&(b.x, b.y, b.scale, b.orientation))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    keypoints.dedup_by(|a, b| {
        (a.x - b.x).abs() < 1e-4
            && (a.y - b.y).abs() < 1e-4
            && (a.scale - b.scale).abs() < 1e-4
            && (a.orientation - b.orientation).abs() < 1e-4
    });
    if let Some(limit) = params.max_keypoints {
        if keypoints.len() > limit {
            keypoints.sort_by(|a, b| b.response.total_cmp(&a.response));
            keypoints.truncate(limit);
        }
    }
    KeypointSet { keypoints }
}

fn sq_dist(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest and second-nearest neighbour of every row of `from` in `to`.
fn nearest_two(from: &KeypointSet, to: &KeypointSet) -> Vec<(usize, f32, f32)> {
    from.keypoints
        .iter()
        .map(|k| {
            let mut best = (usize::MAX, f32::INFINITY);
            let mut second = f32::INFINITY;
            for (j, other) in to.keypoints.iter().enumerate() {
                let d = sq_dist(&k.descriptor, &other.descriptor);
                if d < best.1 {
                    second = best.1;
                    best = (j, d);
                } else if d < second {
                    second = d;
                }
            }
            (best.0, best.1, second)
        })
        .collect()
}

/// Matches that are mutual nearest neighbours and pass the ratio test in
/// both directions. Symmetric in its arguments by construction.
pub fn count_good_matches(a: &KeypointSet, b: &KeypointSet, ratio: f32) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let ab = nearest_two(a, b);
    let ba = nearest_two(b, a);
    let r2 = ratio * ratio;
    ab.iter()
        .enumerate()
        .filter(|&(i, &(j, d, second))| {
            let (back, _, second_back) = ba[j];
            back == i && d < r2 * second && d < r2 * second_back
        })
        .count()
}

/// Dice-style score `2m / (|Ka| + |Kb|)`. Zero, flagged degenerate, when
/// either side has no keypoints.
pub fn match_score(a: &KeypointSet, b: &KeypointSet, ratio: f32) -> SimilarityScore {
    if a.is_empty() || b.is_empty() {
        return SimilarityScore::degenerate(MetricId::Sift, 0.0);
    }
    let m = count_good_matches(a, b, ratio);
    SimilarityScore::new(MetricId::Sift, (2 * m) as f64 / (a.len() + b.len()) as f64)
}

pub fn sift_similarity(a: &RgbImage, b: &RgbImage, params: &SiftParams) -> SimilarityScore {
    match_score(&detect(a, params), &detect(b, params), params.ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{Generator, ProceduralGenerator};
    use image::Rgb;

    fn textured(seed: u64) -> RgbImage {
        ProceduralGenerator.render(&format!("texture {seed}"), 4, seed, 128).unwrap()
    }

    #[test]
    fn descriptors_are_unit_length() {
        let kps = detect(&textured(1), &SiftParams::default());
        assert!(kps.len() > 10, "{}", kps.len());
        for k in &kps.keypoints {
            assert_eq!(k.descriptor.len(), DESCRIPTOR_LEN);
            let n: f32 = k.descriptor.iter().map(|v| v * v).sum::<f32>().sqrt();
            assert!((n - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn identical_image_scores_high() {
        let img = textured(2);
        let s = sift_similarity(&img, &img, &SiftParams::default());
        assert!(s.value > 0.9, "{}", s.value);
    }

    #[test]
    fn uniform_image_is_degenerate() {
        let gray = RgbImage::from_pixel(128, 128, Rgb([128, 128, 128]));
        let s = sift_similarity(&textured(3), &gray, &SiftParams::default());
        assert_eq!(s.value, 0.0);
        assert!(s.is_degenerate());
    }

    #[test]
    fn symmetric() {
        let p = SiftParams::default();
        let (a, b) = (detect(&textured(4), &p), detect(&textured(5), &p));
        assert_eq!(match_score(&a, &b, 0.75), match_score(&b, &a, 0.75));
    }

    #[test]
    fn rotation_keeps_matches() {
        let img = textured(6);
        let rotated = image::imageops::rotate90(&img);
        let s = sift_similarity(&img, &rotated, &SiftParams::default());
        assert!(s.value > 0.3, "{}", s.value);
    }
}
