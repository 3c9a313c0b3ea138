//! The 52-feature schema, per-subject extraction and the feature CSV.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use crate::detect::{DetectionBox, DetectionClass, DetectionInput};
use crate::error::{Result, TongueError};
use crate::glcm::{glcm_texture, GlcmConfig, TextureStats};
use crate::io::{find_image, load_observation};
use crate::physio::{PhysioRecord, PHYSIO_NAMES};
use crate::region::{coat_ratio, morphology, region_color_stats, split_coat_body, AspectRule, RegionStats, TongueObservation};

pub const REGIONS: [&str; 2] = ["body", "coat"];

/// Validity of the region-dependent features. A zero flag means the matching
/// features were filled with 0.
pub const FLAG_NAMES: [&str; 4] = ["body_color_valid", "body_texture_valid", "coat_color_valid", "coat_texture_valid"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    pub names: Vec<String>,
}

impl FeatureSchema {
    /// Physiological, body then coat colour, coat ratio, body then coat
    /// texture, morphology, detections.
    pub fn canonical() -> Self {
        let mut names: Vec<String> = PHYSIO_NAMES.iter().map(|s| s.to_string()).collect();
        for region in REGIONS {
            names.extend(RegionStats::NAMES.iter().map(|c| format!("{region}_{c}")));
        }
        names.push("coat_ratio".into());
        for region in REGIONS {
            names.extend(TextureStats::NAMES.iter().map(|c| format!("{region}_{c}")));
        }
        names.extend(["area_ratio".to_string(), "aspect_ratio".to_string()]);
        for class in DetectionClass::ALL {
            names.push(format!("{class}_count"));
            names.push(format!("{class}_area"));
        }
        Self { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Indexed like [`FLAG_NAMES`].
    pub flags: [bool; 4],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtractConfig {
    pub glcm: GlcmConfig,
    pub aspect: AspectRule,
}

/// Features in `schema` order. Empty coat or body regions, and regions with
/// no co-occurring pair, fall back to zeros with the matching flag cleared.
pub fn extract_features(
    obs: &TongueObservation,
    physio: &PhysioRecord,
    detections: &DetectionInput,
    schema: &FeatureSchema,
    config: &ExtractConfig,
) -> Result<FeatureVector> {
    let (coat, body) = split_coat_body(obs);
    let mut values: Vec<f64> = physio.indicators()?.to_vec();
    let mut flags = [true; 4];
    let mut textures = Vec::with_capacity(2);
    for (k, region) in [&body, &coat].into_iter().enumerate() {
        let color = match region_color_stats(obs, region) {
            Ok(s) => s,
            Err(TongueError::EmptyRegion) => {
                flags[2 * k] = false;
                RegionStats::default()
            }
            Err(e) => return Err(e),
        };
        values.extend(color.values());
        let texture = match glcm_texture(obs, region, &config.glcm) {
            Ok(t) => t.values(),
            Err(TongueError::NoPairs) => {
                flags[2 * k + 1] = false;
                [0.0; 4]
            }
            Err(e) => return Err(e),
        };
        textures.push(texture);
    }
    values.push(coat_ratio(&coat, &obs.mask)?);
    values.extend(textures.concat());
    let morph = morphology(obs, config.aspect)?;
    values.extend([morph.area_ratio, morph.aspect_ratio]);
    values.extend(detections.values());

    let canonical = FeatureSchema::canonical();
    debug_assert_eq!(values.len(), canonical.len());
    if schema == &canonical {
        return Ok(FeatureVector { values, flags });
    }
    let index: HashMap<&str, usize> = canonical.names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut ordered = Vec::with_capacity(schema.len());
    for name in &schema.names {
        let i = index.get(name.as_str()).ok_or(TongueError::SchemaWidth {
            expected: canonical.len(),
            found: schema.len(),
        })?;
        ordered.push(values[*i]);
    }
    Ok(FeatureVector { values: ordered, flags })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub features: FeatureVector,
    pub label: Option<u8>,
    pub embedding: Option<Vec<f64>>,
}

/// Writes `id, <schema>, <flags>, emb_*, label`. Embedding and label columns
/// appear when the first row has them.
pub fn write_feature_csv<W: Write>(out: W, schema: &FeatureSchema, rows: &[FeatureRow]) -> Result<()> {
    let embed_dim = rows.first().and_then(|r| r.embedding.as_ref()).map_or(0, Vec::len);
    let with_label = rows.first().is_some_and(|r| r.label.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(schema.names.iter().cloned());
    header.extend(FLAG_NAMES.iter().map(|s| s.to_string()));
    header.extend((0..embed_dim).map(|i| format!("emb_{i}")));
    if with_label {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for row in rows {
        if row.features.values.len() != schema.len() {
            return Err(TongueError::SchemaWidth {
                expected: schema.len(),
                found: row.features.values.len(),
            });
        }
        let mut rec = vec![row.id.clone()];
        rec.extend(row.features.values.iter().map(|v| v.to_string()));
        rec.extend(row.features.flags.iter().map(|&f| u8::from(f).to_string()));
        let emb = row.embedding.as_deref().unwrap_or(&[]);
        if emb.len() != embed_dim {
            return Err(TongueError::SchemaWidth {
                expected: embed_dim,
                found: emb.len(),
            });
        }
        rec.extend(emb.iter().map(|v| v.to_string()));
        if with_label {
            let label = row.label.ok_or_else(|| TongueError::MissingIndicator {
                id: row.id.clone(),
                indicator: "label".into(),
            })?;
            rec.push(label.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Extracts every subject in `physio`, looking up `<id>.png|jpg|jpeg` in
/// both directories. Subjects without detections get zero detection features.
pub fn extract_all(
    images: &Path,
    masks: &Path,
    physio: &[PhysioRecord],
    detections: &BTreeMap<String, Vec<DetectionBox>>,
    schema: &FeatureSchema,
    config: &ExtractConfig,
) -> Result<Vec<FeatureRow>> {
    physio
        .iter()
        .map(|p| {
            let obs = load_observation(&find_image(images, &p.id)?, &find_image(masks, &p.id)?)?;
            let boxes = detections.get(&p.id).map_or(&[][..], Vec::as_slice);
            let det = DetectionInput::from_boxes(boxes, &obs.mask);
            Ok(FeatureRow {
                id: p.id.clone(),
                features: extract_features(&obs, p, &det, schema, config)?,
                label: p.label,
                embedding: None,
            })
        })
        .collect()
}
