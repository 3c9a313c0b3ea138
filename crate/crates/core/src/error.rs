use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: left {left:?} vs right {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("backward called on {0} before a forward pass")]
    NoForward(&'static str),

    #[error("batch norm in training mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),

    #[error("{what} width {found} does not match the configured width {expected}")]
    Width {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("loss is not finite")]
    NonFiniteLoss,

    #[error("training diverged at epoch {epoch}, batch {batch} (lr = {lr}): loss = {loss}")]
    Diverged {
        epoch: usize,
        batch: usize,
        lr: f64,
        loss: f64,
    },

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Failures reading a model checkpoint. Each corruption mode is a distinct variant.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a SelectorNet checkpoint (bad magic bytes)")]
    BadMagic,

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u8, expected: u8 },

    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),

    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// Dataset ingestion failures. Row numbers are 1-based data rows (the header is not counted).
#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column \"{0}\"")]
    MissingColumn(String),

    #[error("row {row}, column \"{column}\": cannot parse {value:?} as a number")]
    NotNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column \"label\": value {value} is outside {{0, 1}}")]
    LabelDomain { row: usize, value: String },

    #[error("row {row}: expected {expected} fields, found {found}")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid schema: {0}")]
    Schema(String),
}
