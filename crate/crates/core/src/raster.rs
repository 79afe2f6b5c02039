//! Small raster helpers shared by the pipeline, the metrics and the study.

use std::io::Cursor;
use std::path::Path;

use image::imageops::{self, FilterType};
use image::{ImageFormat, RgbImage};
use sha2::{Digest, Sha256};

/// SHA-256 over the dimensions and raw RGB bytes.
pub fn checksum(image: &RgbImage) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(image.width().to_le_bytes());
    hasher.update(image.height().to_le_bytes());
    hasher.update(image.as_raw());
    hasher.finalize().into()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn encode_png(image: &RgbImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    image
        .write_to(&mut buf, ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    buf.into_inner()
}

pub fn decode_image(bytes: &[u8]) -> Result<RgbImage, image::ImageError> {
    Ok(image::load_from_memory(bytes)?.to_rgb8())
}

pub fn open_rgb(path: &Path) -> Result<RgbImage, image::ImageError> {
    Ok(image::open(path)?.to_rgb8())
}

/// Center-crops to a square on the shorter side, then resizes to
/// `side`×`side`. Images that are already `side`×`side` come back unchanged.
pub fn center_crop_resize(image: &RgbImage, side: u32) -> RgbImage {
    let (w, h) = image.dimensions();
    if w == side && h == side {
        return image.clone();
    }
    let short = w.min(h);
    let x = (w - short) / 2;
    let y = (h - short) / 2;
    let cropped = imageops::crop_imm(image, x, y, short, short).to_image();
    if short == side {
        return cropped;
    }
    imageops::resize(&cropped, side, side, FilterType::Triangle)
}

/// Resizes to exactly `side`×`side` without cropping (no-op when already there).
pub fn resize_square(image: &RgbImage, side: u32) -> RgbImage {
    if image.dimensions() == (side, side) {
        return image.clone();
    }
    imageops::resize(image, side, side, FilterType::Triangle)
}
