//! Physiological indicators. Height is in centimetres, weight in kilograms.

use std::path::Path;

use crate::error::{Result, TongueError};
use crate::io::column_index;

pub const PHYSIO_NAMES: [&str; 9] = [
    "Gender",
    "Age",
    "Height",
    "Weight",
    "Waist Circumference",
    "Hip Circumference",
    "WHR",
    "WHtR",
    "BMI",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhysioRecord {
    pub id: String,
    /// Male = 1, female = 0.
    pub gender: Option<f64>,
    pub age: Option<f64>,
    pub height: Option<f64>,
    pub weight: Option<f64>,
    pub waist: Option<f64>,
    pub hip: Option<f64>,
    pub whr: Option<f64>,
    pub whtr: Option<f64>,
    pub bmi: Option<f64>,
    pub label: Option<u8>,
}

pub fn bmi(height_cm: f64, weight_kg: f64) -> f64 {
    let m = height_cm / 100.0;
    weight_kg / (m * m)
}

impl PhysioRecord {
    /// The nine indicators in schema order, deriving WHR, WHtR and BMI when absent.
    pub fn indicators(&self) -> Result<[f64; 9]> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| TongueError::MissingIndicator {
                id: self.id.clone(),
                indicator: name.to_string(),
            })
        };
        let gender = need(self.gender, PHYSIO_NAMES[0])?;
        let age = need(self.age, PHYSIO_NAMES[1])?;
        let height = need(self.height, PHYSIO_NAMES[2])?;
        let weight = need(self.weight, PHYSIO_NAMES[3])?;
        let waist = need(self.waist, PHYSIO_NAMES[4])?;
        let hip = need(self.hip, PHYSIO_NAMES[5])?;
        Ok([
            gender,
            age,
            height,
            weight,
            waist,
            hip,
            self.whr.unwrap_or(waist / hip),
            self.whtr.unwrap_or(waist / height),
            self.bmi.unwrap_or_else(|| bmi(height, weight)),
        ])
    }
}

fn parse_gender(s: &str) -> Option<f64> {
    match s.to_ascii_lowercase().as_str() {
        "m" | "male" | "1" => Some(1.0),
        "f" | "female" | "0" => Some(0.0),
        _ => None,
    }
}

/// Reads a CSV with an `id` column and any of the indicator columns plus an
/// optional `label`. Empty cells are absent values.
pub fn read_physio(path: &Path) -> Result<Vec<PhysioRecord>> {
    let file = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = rdr.headers()?.clone();
    let i_id = column_index(&header, "id", &file)?;
    let cols: Vec<Option<usize>> = PHYSIO_NAMES
        .iter()
        .map(|n| header.iter().position(|h| h == *n))
        .collect();
    let i_label = header.iter().position(|h| h == "label");
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |i: usize| TongueError::Parse {
            file: file.clone(),
            row: r + 1,
            column: header[i].to_string(),
            value: rec[i].to_string(),
        };
        let mut values = [None; 9];
        for (k, col) in cols.iter().enumerate() {
            let Some(i) = *col else { continue };
            let raw = &rec[i];
            if raw.is_empty() {
                continue;
            }
            let v = if k == 0 {
                parse_gender(raw)
            } else {
                raw.parse::<f64>().ok().filter(|v| v.is_finite())
            };
            values[k] = Some(v.ok_or_else(|| bad(i))?);
        }
        let label = match i_label.map(|i| (i, &rec[i])) {
            None | Some((_, "")) => None,
            Some((_, "0" | "0.0")) => Some(0),
            Some((_, "1" | "1.0")) => Some(1),
            Some((i, _)) => return Err(bad(i)),
        };
        let [gender, age, height, weight, waist, hip, whr, whtr, bmi] = values;
        out.push(PhysioRecord {
            id: rec[i_id].to_string(),
            gender,
            age,
            height,
            weight,
            waist,
            hip,
            whr,
            whtr,
            bmi,
            label,
        });
    }
    Ok(out)
}
