//! Externally detected texture marks, reduced to a count and a covered-area
//! ratio per class.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, TongueError};
use crate::io::{column_index, parse_cell};
use crate::region::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectionClass {
    Crack,
    PeeledCoat,
    Spot,
    ToothMark,
}

impl DetectionClass {
    pub const ALL: [DetectionClass; 4] = [
        DetectionClass::Crack,
        DetectionClass::PeeledCoat,
        DetectionClass::Spot,
        DetectionClass::ToothMark,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectionClass::Crack => "crack",
            DetectionClass::PeeledCoat => "peeled_coat",
            DetectionClass::Spot => "spot",
            DetectionClass::ToothMark => "tooth_mark",
        }
    }
}

impl fmt::Display for DetectionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectionClass {
    type Err = TongueError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        DetectionClass::ALL
            .into_iter()
            .find(|c| c.name() == key)
            .ok_or_else(|| TongueError::UnknownClass(s.to_string()))
    }
}

/// Axis-aligned box in pixel coordinates. Pixel `(x, y)` is covered when its
/// centre `(x + 0.5, y + 0.5)` lies in `[x_min, x_max) x [y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionBox {
    pub class: DetectionClass,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl DetectionBox {
    pub fn covers(&self, x: u32, y: u32) -> bool {
        let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
        (self.x_min..self.x_max).contains(&cx) && (self.y_min..self.y_max).contains(&cy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassSummary {
    pub count: usize,
    /// Tongue pixels under the union of this class's boxes, over all tongue pixels.
    pub area_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetectionInput {
    /// Indexed like [`DetectionClass::ALL`].
    pub classes: [ClassSummary; 4],
}

impl DetectionInput {
    pub fn from_boxes(boxes: &[DetectionBox], tongue: &Mask) -> Self {
        let total = tongue.count();
        let mut out = DetectionInput::default();
        for (k, class) in DetectionClass::ALL.iter().enumerate() {
            let mine: Vec<&DetectionBox> = boxes.iter().filter(|b| b.class == *class).collect();
            let covered = if mine.is_empty() || total == 0 {
                0
            } else {
                tongue.pixels().filter(|&(x, y)| mine.iter().any(|b| b.covers(x, y))).count()
            };
            out.classes[k] = ClassSummary {
                count: mine.len(),
                area_ratio: if total == 0 { 0.0 } else { covered as f64 / total as f64 },
            };
        }
        out
    }

    pub fn get(&self, class: DetectionClass) -> ClassSummary {
        self.classes[class as usize]
    }

    /// `count, area` per class, in class order.
    pub fn values(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (k, c) in self.classes.iter().enumerate() {
            out[2 * k] = c.count as f64;
            out[2 * k + 1] = c.area_ratio;
        }
        out
    }
}

/// Reads `image_id, class, x_min, y_min, x_max, y_max` rows, grouped by image id.
pub fn read_detections(path: &Path) -> Result<BTreeMap<String, Vec<DetectionBox>>> {
    let file = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = rdr.headers()?.clone();
    let idx = |name: &str| column_index(&header, name, &file);
    let (i_id, i_class) = (idx("image_id")?, idx("class")?);
    let coords = [idx("x_min")?, idx("y_min")?, idx("x_max")?, idx("y_max")?];
    let mut out: BTreeMap<String, Vec<DetectionBox>> = BTreeMap::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut c = [0.0; 4];
        for (slot, &i) in c.iter_mut().zip(&coords) {
            *slot = parse_cell(&rec, &header, i, r + 1, &file)?;
        }
        let [x_min, y_min, x_max, y_max] = c;
        out.entry(rec[i_id].to_string()).or_default().push(DetectionBox {
            class: rec[i_class].parse()?,
            x_min,
            y_min,
            x_max,
            y_max,
        });
    }
    Ok(out)
}
