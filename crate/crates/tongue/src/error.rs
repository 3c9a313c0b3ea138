use thiserror::Error;

pub type Result<T, E = TongueError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TongueError {
    #[error("image is {image:?} but mask is {mask:?}")]
    DimensionMismatch {
        image: (u32, u32),
        mask: (u32, u32),
    },

    #[error("tongue mask has no pixels")]
    EmptyMask,

    #[error("region has no pixels")]
    EmptyRegion,

    #[error("region has no co-occurring pixel pair")]
    NoPairs,

    #[error("invalid texture configuration: {0}")]
    Config(String),

    #[error("{id}: missing physiological indicator \"{indicator}\"")]
    MissingIndicator { id: String, indicator: String },

    #[error("{file}, row {row}, column \"{column}\": cannot parse {value:?}")]
    Parse {
        file: String,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{file}: missing column \"{column}\"")]
    MissingColumn { file: String, column: String },

    #[error("unknown detection class {0:?}")]
    UnknownClass(String),

    #[error("feature vector has {found} values, schema has {expected}")]
    SchemaWidth { expected: usize, found: usize },

    #[error("{0}: no matching file")]
    MissingFile(String),

    #[error("{path}: {source}")]
    Image {
        path: String,
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
