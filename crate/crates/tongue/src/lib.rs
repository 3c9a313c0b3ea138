//! Tongue-image features from an RGB image and a binary tongue mask: the
//! coat/body split, colour means in RGB, HSI, YCrCb and Lab, masked GLCM
//! texture, morphology, and merging of external detections and
//! physiological indicators into one feature row.
//!
//! Colour means are taken over per-pixel conversions, not by converting the
//! mean RGB.

pub mod color;
pub mod detect;
mod error;
pub mod features;
pub mod glcm;
pub mod io;
pub mod physio;
pub mod region;

pub use color::{luma, rgb_to_hsi, rgb_to_lab, rgb_to_space, rgb_to_ycrcb, Rgb, Space};
pub use detect::{read_detections, ClassSummary, DetectionBox, DetectionClass, DetectionInput};
pub use error::{Result, TongueError};
pub use features::{
    extract_all, extract_features, write_feature_csv, ExtractConfig, FeatureRow, FeatureSchema, FeatureVector,
    FLAG_NAMES,
};
pub use glcm::{glcm_from_levels, glcm_texture, gray_value, quantize, Glcm, GlcmConfig, TextureStats, FOUR_DIRECTIONS};
pub use io::{find_image, load_observation};
pub use physio::{bmi, read_physio, PhysioRecord, PHYSIO_NAMES};
pub use region::{
    coat_ratio, is_coat, morphology, region_color_stats, split_coat_body, AspectRule, Mask, Morphology, RegionStats,
    TongueObservation, COAT_THRESHOLD,
};
