use std::path::{Path, PathBuf};

use image::RgbImage;

use crate::pipeline::source::list_images;
use crate::raster;

#[derive(Debug, Clone)]
pub struct StudyImage {
    /// File name; doubles as the item id in score tables.
    pub item_id: String,
    pub image: RgbImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub images: Vec<StudyImage>,
    pub skipped: Vec<SkippedFile>,
}

/// Loads every raster in `dir` (file-name order), center-crops it to a
/// square and resizes it to `target_size`. Unreadable files are skipped and
/// reported, not fatal.
pub fn ingest_dataset(dir: &Path, target_size: u32) -> std::io::Result<Dataset> {
    let mut out = Dataset::default();
    for path in list_images(dir)? {
        match raster::open_rgb(&path) {
            Ok(img) => out.images.push(StudyImage {
                item_id: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                image: raster::center_crop_resize(&img, target_size),
            }),
            Err(e) => {
                log::warn!("skipping unreadable image {}: {e}", path.display());
                out.skipped.push(SkippedFile { path, reason: e.to_string() });
            }
        }
    }
    log::info!("ingested {} images ({} skipped) from {}", out.images.len(), out.skipped.len(), dir.display());
    Ok(out)
}
