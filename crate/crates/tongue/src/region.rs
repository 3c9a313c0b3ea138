//! Tongue observation, coat/body split, region colour means and morphology.

use image::RgbImage;

use crate::color::{rgb_to_hsi, rgb_to_lab, rgb_to_ycrcb, Rgb};
use crate::error::{Result, TongueError};

/// Pixels with `R - (G + B)` at or below this are coat.
pub const COAT_THRESHOLD: i32 = -45;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize, "mask size");
        Self { width, height, data }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let data = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, data }
    }

    /// Nonzero luma is tongue.
    pub fn from_gray(img: &image::GrayImage) -> Self {
        Self::new(img.width(), img.height(), img.pixels().map(|p| p.0[0] != 0).collect())
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    /// Row-major coordinates of the set pixels.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(i, _)| (i as u32 % w, i as u32 / w))
    }

    /// `(x_min, y_min, x_max, y_max)` inclusive, `None` when empty.
    pub fn bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        self.pixels().fold(None, |acc, (x, y)| {
            Some(match acc {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            })
        })
    }
}

#[derive(Debug, Clone)]
pub struct TongueObservation {
    pub image: RgbImage,
    pub mask: Mask,
}

impl TongueObservation {
    pub fn new(image: RgbImage, mask: Mask) -> Result<Self> {
        if image.dimensions() != mask.dimensions() {
            return Err(TongueError::DimensionMismatch {
                image: image.dimensions(),
                mask: mask.dimensions(),
            });
        }
        if mask.is_empty() {
            return Err(TongueError::EmptyMask);
        }
        Ok(Self { image, mask })
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        self.image.get_pixel(x, y).0
    }
}

pub fn is_coat(px: Rgb) -> bool {
    let [r, g, b] = px.map(i32::from);
    r - (g + b) <= COAT_THRESHOLD
}

/// `(coat, body)`, a partition of the tongue mask.
pub fn split_coat_body(obs: &TongueObservation) -> (Mask, Mask) {
    let (w, h) = obs.mask.dimensions();
    let coat = Mask::from_fn(w, h, |x, y| obs.mask.get(x, y) && is_coat(obs.pixel(x, y)));
    let body = Mask::from_fn(w, h, |x, y| obs.mask.get(x, y) && !coat.get(x, y));
    (coat, body)
}

/// Mean colour of a region in RGB, HSI, YCrCb and Lab.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegionStats {
    pub rgb: [f64; 3],
    pub hsi: [f64; 3],
    pub ycrcb: [f64; 3],
    pub lab: [f64; 3],
}

impl RegionStats {
    pub const NAMES: [&'static str; 12] = ["R", "G", "B", "H", "S", "I", "Y", "Cr", "Cb", "L", "a", "b"];

    pub fn values(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for (k, part) in [self.rgb, self.hsi, self.ycrcb, self.lab].iter().enumerate() {
            out[3 * k..3 * k + 3].copy_from_slice(part);
        }
        out
    }
}

/// Channel means over the region, converting each pixel before averaging.
pub fn region_color_stats(obs: &TongueObservation, region: &Mask) -> Result<RegionStats> {
    let mut sums = [0.0; 12];
    let mut n = 0usize;
    for (x, y) in region.pixels() {
        let px = obs.pixel(x, y);
        let parts = [px.map(f64::from), rgb_to_hsi(px), rgb_to_ycrcb(px), rgb_to_lab(px)];
        for (k, part) in parts.iter().enumerate() {
            for c in 0..3 {
                sums[3 * k + c] += part[c];
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(TongueError::EmptyRegion);
    }
    let m = sums.map(|s| s / n as f64);
    let take = |k: usize| [m[3 * k], m[3 * k + 1], m[3 * k + 2]];
    Ok(RegionStats {
        rgb: take(0),
        hsi: take(1),
        ycrcb: take(2),
        lab: take(3),
    })
}

pub fn coat_ratio(coat: &Mask, tongue: &Mask) -> Result<f64> {
    let total = tongue.count();
    if total == 0 {
        return Err(TongueError::EmptyMask);
    }
    let inside = coat
        .pixels()
        .filter(|&(x, y)| tongue.get(x, y))
        .count();
    Ok(inside as f64 / total as f64)
}

/// Which bounding-box extent counts as the tongue's length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AspectRule {
    /// Vertical extent over horizontal extent.
    #[default]
    HeightOverWidth,
    WidthOverHeight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Morphology {
    pub area_ratio: f64,
    pub aspect_ratio: f64,
}

pub fn morphology(obs: &TongueObservation, rule: AspectRule) -> Result<Morphology> {
    let (x0, y0, x1, y1) = obs.mask.bounding_box().ok_or(TongueError::EmptyMask)?;
    let (w, h) = obs.mask.dimensions();
    let bw = (x1 - x0 + 1) as f64;
    let bh = (y1 - y0 + 1) as f64;
    Ok(Morphology {
        area_ratio: obs.mask.count() as f64 / (w as f64 * h as f64),
        aspect_ratio: match rule {
            AspectRule::HeightOverWidth => bh / bw,
            AspectRule::WidthOverHeight => bw / bh,
        },
    })
}
