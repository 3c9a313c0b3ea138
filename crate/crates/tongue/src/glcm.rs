//! Masked gray-level co-occurrence texture statistics.

use crate::color::Rgb;
use crate::error::{Result, TongueError};
use crate::region::{Mask, TongueObservation};

#[derive(Debug, Clone, PartialEq)]
pub struct GlcmConfig {
    pub levels: usize,
    pub distance: u32,
    /// Pixel offsets `(dx, dy)` at unit distance; scaled by `distance`.
    pub directions: Vec<(i32, i32)>,
    pub symmetric: bool,
}

/// 0°, 45°, 90° and 135°, with image rows growing downwards.
pub const FOUR_DIRECTIONS: [(i32, i32); 4] = [(1, 0), (1, -1), (0, -1), (-1, -1)];

impl Default for GlcmConfig {
    fn default() -> Self {
        Self {
            levels: 64,
            distance: 1,
            directions: FOUR_DIRECTIONS.to_vec(),
            symmetric: true,
        }
    }
}

impl GlcmConfig {
    pub fn horizontal(levels: usize) -> Self {
        Self {
            levels,
            directions: vec![(1, 0)],
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(2..=256).contains(&self.levels) {
            return Err(TongueError::Config(format!("levels must be in 2..=256, got {}", self.levels)));
        }
        if self.distance == 0 || self.directions.is_empty() {
            return Err(TongueError::Config("need a positive distance and at least one direction".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureStats {
    pub con: f64,
    pub asm: f64,
    pub ent: f64,
    pub mean: f64,
}

impl TextureStats {
    pub const NAMES: [&'static str; 4] = ["CON", "ASM", "ENT", "MEAN"];

    pub fn values(&self) -> [f64; 4] {
        [self.con, self.asm, self.ent, self.mean]
    }
}

/// Normalized co-occurrence probabilities, `levels x levels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    pub levels: usize,
    pub p: Vec<f64>,
    pub pairs: u64,
}

impl Glcm {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }

    pub fn stats(&self) -> TextureStats {
        let (mut con, mut asm, mut ent, mut mean) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..self.levels {
            for j in 0..self.levels {
                let p = self.get(i, j);
                if p == 0.0 {
                    continue;
                }
                let d = i as f64 - j as f64;
                con += d * d * p;
                asm += p * p;
                ent -= p * p.ln();
                mean += i as f64 * p;
            }
        }
        TextureStats { con, asm, ent, mean }
    }
}

/// BT.601 luma rounded to the nearest integer, in integer arithmetic so
/// gray pixels keep their value exactly.
pub fn gray_value(px: Rgb) -> u32 {
    let [r, g, b] = px.map(u32::from);
    (299 * r + 587 * g + 114 * b + 500) / 1000
}

/// Gray value scaled to `levels` bins, `floor(gray * levels / 256)`.
pub fn quantize(obs: &TongueObservation, levels: usize) -> Vec<usize> {
    obs.image
        .pixels()
        .map(|p| gray_value(p.0) as usize * levels / 256)
        .collect()
}

/// Co-occurrences over an already-quantized raster of `width` columns.
/// Only pairs with both pixels inside `region` count.
pub fn glcm_from_levels(gray: &[usize], width: u32, region: &Mask, config: &GlcmConfig) -> Result<Glcm> {
    config.validate()?;
    let (w, h) = region.dimensions();
    if w != width || gray.len() != w as usize * h as usize {
        return Err(TongueError::Config("gray raster does not match the region".into()));
    }
    let n = config.levels;
    let mut counts = vec![0u64; n * n];
    let d = config.distance as i64;
    for (x, y) in region.pixels() {
        let a = gray[(y * w + x) as usize];
        if a >= n {
            return Err(TongueError::Config(format!("gray level {a} outside {n} levels")));
        }
        for &(dx, dy) in &config.directions {
            let (nx, ny) = (x as i64 + dx as i64 * d, y as i64 + dy as i64 * d);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 || !region.get(nx as u32, ny as u32) {
                continue;
            }
            let b = gray[(ny as u32 * w + nx as u32) as usize];
            if b >= n {
                return Err(TongueError::Config(format!("gray level {b} outside {n} levels")));
            }
            counts[a * n + b] += 1;
            if config.symmetric {
                counts[b * n + a] += 1;
            }
        }
    }
    let pairs: u64 = counts.iter().sum();
    if pairs == 0 {
        return Err(TongueError::NoPairs);
    }
    Ok(Glcm {
        levels: n,
        p: counts.iter().map(|&c| c as f64 / pairs as f64).collect(),
        pairs,
    })
}

pub fn glcm_texture(obs: &TongueObservation, region: &Mask, config: &GlcmConfig) -> Result<TextureStats> {
    config.validate()?;
    let gray = quantize(obs, config.levels);
    Ok(glcm_from_levels(&gray, obs.image.width(), region, config)?.stats())
}
