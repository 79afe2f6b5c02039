#![allow(dead_code)]

use std::path::Path;

use image::RgbImage;
use seethrough_core::pipeline::{Generator, ProceduralGenerator};
use seethrough_core::raster;

/// Deterministic "photographs": procedural renders of fixed prompts.
pub fn synthetic_image(i: usize, side: u32) -> RgbImage {
    ProceduralGenerator
        .render(&format!("synthetic scene number {i}"), 4, 1000 + i as u64, side)
        .expect("procedural render")
}

/// Writes `n` PNGs named `img_000.png`, ... into `dir`.
pub fn write_dataset(dir: &Path, n: usize, side: u32) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        std::fs::write(dir.join(format!("img_{i:03}.png")), raster::encode_png(&synthetic_image(i, side))).unwrap();
    }
}

pub fn sentences() -> Vec<String> {
    let subjects = ["a dog", "two children", "an old man", "a red car", "a small boat", "a woman", "three birds", "a cat", "a horse", "a cyclist"];
    let actions = ["runs across", "waits beside", "rests near", "moves along", "stands in front of"];
    let places = ["a quiet street", "the sandy beach", "a green park", "the busy market", "a wooden bridge"];
    let mut out = Vec::new();
    for (k, s) in subjects.iter().enumerate() {
        for j in 0..5 {
            out.push(format!("{s} {} {} in the morning light.", actions[(k + j) % 5], places[(2 * k + j) % 5]));
        }
    }
    out
}
