//! SelectorNet architecture, attention reports and checkpoints.

mod attention;
pub mod blocks;
pub mod checkpoint;
mod config;
mod model;


pub use attention::{attention, AttentionReport};
pub use blocks::{split, FusionAttention, ResBlock, SelectorBlock, Selection};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{
    AttentionScope, FabStepSource, FabVariant, ResBlockVariant, SelectorNetConfig, SelectorVariant, Variant,
    DEFAULT_EMBED_DIM, DEFAULT_STEPS,
};
pub use model::{ForwardOutput, SelectorNet, Step, StepTrace};
