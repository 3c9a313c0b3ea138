//! Image loading and small CSV helpers.

use std::path::{Path, PathBuf};

use crate::error::{Result, TongueError};
use crate::region::{Mask, TongueObservation};

pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn open(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| TongueError::Image {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_observation(image: &Path, mask: &Path) -> Result<TongueObservation> {
    let rgb = open(image)?.to_rgb8();
    let mask = Mask::from_gray(&open(mask)?.to_luma8());
    TongueObservation::new(rgb, mask)
}

/// `dir/<stem>.<ext>` for the first image extension that exists.
pub fn find_image(dir: &Path, stem: &str) -> Result<PathBuf> {
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
        .ok_or_else(|| TongueError::MissingFile(dir.join(stem).display().to_string()))
}

pub(crate) fn column_index(header: &csv::StringRecord, name: &str, file: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| TongueError::MissingColumn {
            file: file.to_string(),
            column: name.to_string(),
        })
}

pub(crate) fn parse_cell(rec: &csv::StringRecord, header: &csv::StringRecord, i: usize, row: usize, file: &str) -> Result<f64> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| TongueError::Parse {
        file: file.to_string(),
        row,
        column: header[i].to_string(),
        value: raw.to_string(),
    })
}
