//! SelectorNet: a step-chained tabular classifier with learned feature
//! selection and per-feature attention reports, together with the numeric
//! engine it runs on and a k-fold experiment harness.

pub mod classifier;
pub mod error;
pub mod numeric;
pub mod pipeline;
pub mod selectornet;

pub use classifier::{BatchObjective, Classifier};
pub use error::{CheckpointError, DataError, Error, Result};
