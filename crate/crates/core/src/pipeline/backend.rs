//! Captioner and generator ports, plus the deterministic stub backends used
//! whenever no model is loaded.
//!
//! Stub captioner: the SHA-256 of the raster picks words from fixed lists,
//! the mean colour picks the colour word and mean luminance picks the time
//! of day. The result is a 24-word sentence, or 31 words when checksum bit
//! `0x80` of byte 7 is set and the length hint allows it.
//!
//! Stub generator: the SHA-256 of `(prompt, steps, seed)` seeds a ChaCha8
//! stream. The first two hash bytes fix the base hue; the stream places a
//! gradient, a sinusoidal texture and a set of discs and boxes.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::raster;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend failure: {0}")]
    Failure(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend timed out after {0:.1}s")]
    Timeout(f64),
}

/// Decoding length parameters passed to the captioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthHint {
    pub min_words: usize,
    pub max_words: usize,
}

pub trait Captioner: Send + Sync {
    fn id(&self) -> String;
    fn describe(&self, image: &RgbImage, hint: LengthHint) -> Result<String, BackendError>;
}

/// Renders must be deterministic for fixed `(prompt, steps, seed, resolution)`.
pub trait Generator: Send + Sync {
    fn id(&self) -> String;
    fn render(
        &self,
        prompt: &str,
        steps: u32,
        seed: u64,
        resolution: u32,
    ) -> Result<RgbImage, BackendError>;
}

impl<T: Captioner + ?Sized> Captioner for std::sync::Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn describe(&self, image: &RgbImage, hint: LengthHint) -> Result<String, BackendError> {
        (**self).describe(image, hint)
    }
}

impl<T: Generator + ?Sized> Generator for std::sync::Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn render(&self, prompt: &str, steps: u32, seed: u64, resolution: u32) -> Result<RgbImage, BackendError> {
        (**self).render(prompt, steps, seed, resolution)
    }
}

const ADJECTIVES: [&str; 8] = ["quiet", "tall", "young", "old", "small", "large", "bright", "weathered"];
const SUBJECTS: [&str; 8] = ["man", "woman", "child", "dog", "cat", "horse", "bird", "cyclist"];
const ACTIONS: [&str; 8] = ["stands", "sits", "waits", "rests", "walks", "looks", "plays", "lingers"];
const OBJECTS: [&str; 8] = ["table", "bench", "car", "tree", "lamp", "boat", "fence", "bicycle"];
const PLACES: [&str; 8] = ["park", "kitchen", "street", "garden", "field", "room", "harbor", "forest"];
const MOODS: [&str; 8] = ["calm", "busy", "peaceful", "lively", "still", "warm", "cold", "serene"];
const COUNTS: [&str; 4] = ["two", "three", "four", "several"];
const PLURALS: [&str; 4] = ["birds", "people", "trees", "clouds"];
const TIMES: [&str; 4] = ["night", "evening", "afternoon", "morning"];

const COLOR_NAMES: [(&str, [f32; 3]); 11] = [
    ("red", [200.0, 40.0, 40.0]),
    ("orange", [230.0, 130.0, 40.0]),
    ("yellow", [230.0, 210.0, 60.0]),
    ("green", [60.0, 160.0, 70.0]),
    ("blue", [50.0, 90.0, 200.0]),
    ("purple", [130.0, 60.0, 170.0]),
    ("pink", [230.0, 140.0, 180.0]),
    ("brown", [120.0, 80.0, 50.0]),
    ("gray", [128.0, 128.0, 128.0]),
    ("white", [235.0, 235.0, 235.0]),
    ("black", [25.0, 25.0, 25.0]),
];

fn article(next: &str) -> &'static str {
    match next.as_bytes().first() {
        Some(b'a' | b'e' | b'i' | b'o' | b'u') => "an",
        _ => "a",
    }
}

fn mean_rgb(image: &RgbImage) -> [f32; 3] {
    let mut sum = [0f64; 3];
    for p in image.pixels() {
        for c in 0..3 {
            sum[c] += p[c] as f64;
        }
    }
    let n = (image.width() as f64 * image.height() as f64).max(1.0);
    [(sum[0] / n) as f32, (sum[1] / n) as f32, (sum[2] / n) as f32]
}

/// Nearest named colour to the mean RGB of the image.
pub fn dominant_color_name(image: &RgbImage) -> &'static str {
    let m = mean_rgb(image);
    COLOR_NAMES
        .iter()
        .min_by(|a, b| {
            let da: f32 = (0..3).map(|c| (a.1[c] - m[c]).powi(2)).sum();
            let db: f32 = (0..3).map(|c| (b.1[c] - m[c]).powi(2)).sum();
            da.total_cmp(&db)
        })
        .map(|(n, _)| *n)
        .unwrap()
}

/// Checksum-keyed template captioner.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateCaptioner;

impl Captioner for TemplateCaptioner {
    fn id(&self) -> String {
        "stub-template-captioner/1".into()
    }

    fn describe(&self, image: &RgbImage, hint: LengthHint) -> Result<String, BackendError> {
        if image.width() == 0 || image.height() == 0 {
            return Err(BackendError::Failure("empty raster".into()));
        }
        let h = raster::checksum(image);
        let pick = |i: usize, n: usize| h[i] as usize % n;
        let m = mean_rgb(image);
        let luma = 0.299 * m[0] + 0.587 * m[1] + 0.114 * m[2];
        let time = TIMES[((luma / 64.0) as usize).min(3)];
        let adj = ADJECTIVES[pick(0, 8)];
        let subject = SUBJECTS[pick(1, 8)];
        let action = ACTIONS[pick(2, 8)];
        let color = dominant_color_name(image);
        let object = OBJECTS[pick(3, 8)];
        let place = PLACES[pick(4, 8)];
        let mood = MOODS[pick(5, 8)];
        let mut text = format!(
            "{} {adj} {subject} {action} near {} {color} {object} in {} {place} while soft {time} light falls across the scene and everything feels quite {mood}",
            capitalize(article(adj)),
            article(color),
            article(place),
        );
        if h[7] & 0x80 != 0 && hint.max_words >= 31 {
            text.push_str(&format!(
                ", with {} {} visible in the background",
                COUNTS[pick(6, 4)],
                PLURALS[pick(8, 4)]
            ));
        }
        text.push('.');
        Ok(text)
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Hash-seeded procedural colour-field generator.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProceduralGenerator;

pub fn hsv_to_rgb(h: f32, s: f32, v: f32) -> [f32; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

/// Base hue in degrees that [`ProceduralGenerator`] uses for a prompt.
pub fn procedural_hue(prompt: &str, steps: u32, seed: u64) -> f32 {
    let h = generator_hash(prompt, steps, seed);
    (u16::from_le_bytes([h[0], h[1]]) as f32 / 65536.0) * 360.0
}

fn generator_hash(prompt: &str, steps: u32, seed: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hasher.update(steps.to_le_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.finalize().into()
}

enum Shape {
    Disc { cx: f32, cy: f32, r: f32, color: [f32; 3] },
    Block { x0: f32, y0: f32, x1: f32, y1: f32, color: [f32; 3] },
}

impl Generator for ProceduralGenerator {
    fn id(&self) -> String {
        "stub-procedural-generator/1".into()
    }

    fn render(&self, prompt: &str, steps: u32, seed: u64, resolution: u32) -> Result<RgbImage, BackendError> {
        if prompt.trim().is_empty() {
            return Err(BackendError::Failure("empty prompt".into()));
        }
        if resolution == 0 {
            return Err(BackendError::Failure("zero resolution".into()));
        }
        let hash = generator_hash(prompt, steps, seed);
        let hue = procedural_hue(prompt, steps, seed);
        let mut rng = ChaCha8Rng::from_seed(hash);
        let base = hsv_to_rgb(hue, 0.55, 0.75);
        let dark = hsv_to_rgb(hue + 20.0, 0.6, 0.35);
        let freq_x: f32 = rng.gen_range(2.0..9.0);
        let freq_y: f32 = rng.gen_range(2.0..9.0);
        let phase: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
        let n_shapes = rng.gen_range(8..16);
        let shapes: Vec<Shape> = (0..n_shapes)
            .map(|_| {
                let color = hsv_to_rgb(
                    hue + rng.gen_range(-40.0..40.0f32) + if rng.gen_bool(0.3) { 180.0 } else { 0.0 },
                    rng.gen_range(0.3..0.9),
                    rng.gen_range(0.2..1.0),
                );
                if rng.gen_bool(0.5) {
                    Shape::Disc {
                        cx: rng.gen_range(0.0..1.0),
                        cy: rng.gen_range(0.0..1.0),
                        r: rng.gen_range(0.03..0.15),
                        color,
                    }
                } else {
                    let x0 = rng.gen_range(0.0..0.9f32);
                    let y0 = rng.gen_range(0.0..0.9f32);
                    Shape::Block {
                        x0,
                        y0,
                        x1: x0 + rng.gen_range(0.05..0.3),
                        y1: y0 + rng.gen_range(0.05..0.3),
                        color,
                    }
                }
            })
            .collect();

        let side = resolution as f32;
        let img = RgbImage::from_fn(resolution, resolution, |px, py| {
            let u = (px as f32 + 0.5) / side;
            let v = (py as f32 + 0.5) / side;
            let wave = 0.5
                + 0.5
                    * ((u * freq_x * std::f32::consts::TAU + phase).sin()
                        * (v * freq_y * std::f32::consts::TAU).cos());
            let t = 0.6 * v + 0.4 * wave;
            let mut c = [0f32; 3];
            for k in 0..3 {
                c[k] = base[k] * (1.0 - t) + dark[k] * t;
            }
            for s in shapes.iter().rev() {
                let hit = match *s {
                    Shape::Disc { cx, cy, r, color } => {
                        ((u - cx).powi(2) + (v - cy).powi(2) <= r * r).then_some(color)
                    }
                    Shape::Block { x0, y0, x1, y1, color } => {
                        (u >= x0 && u <= x1 && v >= y0 && v <= y1).then_some(color)
                    }
                };
                if let Some(color) = hit {
                    c = color;
                    break;
                }
            }
            Rgb([c[0].round().clamp(0.0, 255.0) as u8, c[1].round().clamp(0.0, 255.0) as u8, c[2].round().clamp(0.0, 255.0) as u8])
        });
        Ok(img)
    }
}
