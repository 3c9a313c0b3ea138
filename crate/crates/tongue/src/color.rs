//! Per-pixel colour conversions from 8-bit sRGB.
//!
//! HSI uses the hue-angle formulation with `H` in degrees, `S` and `I` in
//! `[0, 1]`. YCrCb is BT.601 full range with a 128 chroma offset. Lab goes
//! through linear sRGB and XYZ with a D65 white.

use std::fmt;
use std::str::FromStr;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    Hsi,
    YCrCb,
    Lab,
}

impl Space {
    pub const ALL: [Space; 3] = [Space::Hsi, Space::YCrCb, Space::Lab];

    pub fn name(self) -> &'static str {
        match self {
            Space::Hsi => "hsi",
            Space::YCrCb => "ycrcb",
            Space::Lab => "lab",
        }
    }

    pub fn channels(self) -> [&'static str; 3] {
        match self {
            Space::Hsi => ["H", "S", "I"],
            Space::YCrCb => ["Y", "Cr", "Cb"],
            Space::Lab => ["L", "a", "b"],
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Space {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Space::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown colour space {s:?}"))
    }
}

pub fn rgb_to_space(px: Rgb, space: Space) -> [f64; 3] {
    match space {
        Space::Hsi => rgb_to_hsi(px),
        Space::YCrCb => rgb_to_ycrcb(px),
        Space::Lab => rgb_to_lab(px),
    }
}

pub fn rgb_to_hsi(px: Rgb) -> [f64; 3] {
    let [r, g, b] = px.map(|c| c as f64 / 255.0);
    let sum = r + g + b;
    let i = sum / 3.0;
    let s = if sum == 0.0 { 0.0 } else { 1.0 - 3.0 * r.min(g).min(b) / sum };
    let den = ((r - g) * (r - g) + (r - b) * (g - b)).sqrt();
    if s == 0.0 || den == 0.0 {
        return [0.0, s.max(0.0), i];
    }
    let cos = (((r - g) + (r - b)) / (2.0 * den)).clamp(-1.0, 1.0);
    let theta = cos.acos().to_degrees();
    let mut h = if b <= g { theta } else { 360.0 - theta };
    if h >= 360.0 {
        h = 0.0;
    }
    [h, s.clamp(0.0, 1.0), i]
}

/// BT.601 luma on the 0..255 scale.
pub fn luma(px: Rgb) -> f64 {
    let [r, g, b] = px.map(f64::from);
    0.299 * r + 0.587 * g + 0.114 * b
}

pub fn rgb_to_ycrcb(px: Rgb) -> [f64; 3] {
    let [r, g, b] = px.map(f64::from);
    let y = luma(px);
    let cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    let cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    [y, cr, cb].map(|v| v.clamp(0.0, 255.0))
}

// linear sRGB -> XYZ, D65
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.powf(1.0 / 3.0)
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn xyz(lin: [f64; 3]) -> [f64; 3] {
    SRGB_TO_XYZ.map(|row| row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2])
}

pub fn rgb_to_lab(px: Rgb) -> [f64; 3] {
    // the white point is the image of sRGB white, so (255,255,255) is exactly (100,0,0)
    let white = xyz([1.0; 3]);
    let v = xyz(px.map(srgb_to_linear));
    let [fx, fy, fz] = [0, 1, 2].map(|k| lab_f(v[k] / white[k]));
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}
