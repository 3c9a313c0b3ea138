use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How the selector block combines the input with `S2 = ResBlock(x_step)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectorVariant {
    /// `X ⊙ (1 + S1) ⊙ S2`
    Full,
    /// `X ⊙ (1 + S1)`
    Stage1Only,
    /// `X ⊙ S2`
    Stage2Only,
    /// `ReLU(Linear([X | S2]))`
    Concat,
    /// `ReLU(Linear(X + S2))`
    Add,
    /// `ReLU(Linear(X ⊙ S2))`
    Hadamard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FabVariant {
    Attention,
    /// Both outputs are `ReLU(Linear([x | x_step]))`.
    ConcatLinearRelu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResBlockVariant {
    /// `x + Linear2(ReLU(Linear1(BN(x))))`
    Residual,
    /// `ReLU(Linear(x))`
    LinearRelu,
}

/// Which tensor the fusion attention block receives as its step input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FabStepSource {
    /// The incoming `x_step`, unprocessed.
    Raw,
    /// `S2 = ResBlock(x_step)`, the same tensor the selector uses.
    Processed,
}

/// Whether the fusion attention matrix is formed per sample or pooled over the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttentionScope {
    /// `A_b = q_bᵀ·k_b` for each row; predictions do not depend on batch composition.
    Sample,
    /// `A = (1/B)·Qᵀ·K` shared by every row of the batch.
    Batch,
}

macro_rules! string_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }

            pub(crate) fn code(self) -> u8 {
                Self::ALL.iter().position(|v| *v == self).expect("listed") as u8
            }

            pub(crate) fn from_code(code: u8) -> Option<Self> {
                Self::ALL.get(code as usize).copied()
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(format!(
                        "unknown value {other:?}; expected one of: {}",
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}

string_enum!(SelectorVariant {
    Full => "full",
    Stage1Only => "stage1_only",
    Stage2Only => "stage2_only",
    Concat => "concat",
    Add => "add",
    Hadamard => "hadamard",
});

string_enum!(FabVariant {
    Attention => "attention",
    ConcatLinearRelu => "concat_linear_relu",
});

string_enum!(ResBlockVariant {
    Residual => "residual",
    LinearRelu => "linear_relu",
});

string_enum!(AttentionScope {
    Sample => "sample",
    Batch => "batch",
});

string_enum!(FabStepSource {
    Raw => "raw",
    Processed => "processed",
});

pub const DEFAULT_STEPS: usize = 3;
pub const DEFAULT_EMBED_DIM: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorNetConfig {
    pub feature_dim: usize,
    pub steps: usize,
    pub embed_dim: usize,
    pub selector: SelectorVariant,
    pub fab: FabVariant,
    pub resblock: ResBlockVariant,
    pub fab_step_source: FabStepSource,
    pub attention_scope: AttentionScope,
    pub seed: u64,
}

impl SelectorNetConfig {
    pub fn new(feature_dim: usize) -> Self {
        Self {
            feature_dim,
            steps: DEFAULT_STEPS,
            embed_dim: DEFAULT_EMBED_DIM,
            selector: SelectorVariant::Full,
            fab: FabVariant::Attention,
            resblock: ResBlockVariant::Residual,
            fab_step_source: FabStepSource::Raw,
            attention_scope: AttentionScope::Sample,
            seed: 0,
        }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_embed_dim(mut self, embed_dim: usize) -> Self {
        self.embed_dim = embed_dim;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.selector = variant.selector;
        self.fab = variant.fab;
        self.resblock = variant.resblock;
        self
    }

    pub fn variant(&self) -> Variant {
        Variant {
            selector: self.selector,
            fab: self.fab,
            resblock: self.resblock,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::Precondition("feature_dim must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Precondition("steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// One architecture configuration from the ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Variant {
    pub selector: SelectorVariant,
    pub fab: FabVariant,
    pub resblock: ResBlockVariant,
}

impl Default for Variant {
    fn default() -> Self {
        Self {
            selector: SelectorVariant::Full,
            fab: FabVariant::Attention,
            resblock: ResBlockVariant::Residual,
        }
    }
}

impl Variant {
    /// The unmodified network followed by each single-module replacement.
    pub fn ablation_table() -> Vec<(&'static str, &'static str, Variant)> {
        let base = Variant::default();
        vec![
            ("No Change", "No Change", base),
            (
                "ResBlock",
                "Linear+ReLU",
                Variant {
                    resblock: ResBlockVariant::LinearRelu,
                    ..base
                },
            ),
            (
                "SelectorBlock",
                "Concat+Linear+ReLU",
                Variant {
                    selector: SelectorVariant::Concat,
                    ..base
                },
            ),
            (
                "SelectorBlock",
                "Add+Linear+ReLU",
                Variant {
                    selector: SelectorVariant::Add,
                    ..base
                },
            ),
            (
                "SelectorBlock",
                "Hadamard+Linear+ReLU",
                Variant {
                    selector: SelectorVariant::Hadamard,
                    ..base
                },
            ),
            (
                "SelectorBlock",
                "only Stage1",
                Variant {
                    selector: SelectorVariant::Stage1Only,
                    ..base
                },
            ),
            (
                "SelectorBlock",
                "only Stage2",
                Variant {
                    selector: SelectorVariant::Stage2Only,
                    ..base
                },
            ),
            (
                "Fusion Attention Block",
                "Concat+Linear+ReLU",
                Variant {
                    fab: FabVariant::ConcatLinearRelu,
                    ..base
                },
            ),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for v in SelectorVariant::ALL {
            assert_eq!(v.name().parse::<SelectorVariant>().unwrap(), *v);
            assert_eq!(SelectorVariant::from_code(v.code()), Some(*v));
        }
        assert!("bogus".parse::<FabVariant>().is_err());
    }

    #[test]
    fn ablation_table_has_every_replacement() {
        let table = Variant::ablation_table();
        assert_eq!(table.len(), 8);
        for s in SelectorVariant::ALL {
            assert!(table.iter().any(|(_, _, v)| v.selector == *s));
        }
        assert!(table.iter().any(|(_, _, v)| v.fab == FabVariant::ConcatLinearRelu));
        assert!(table.iter().any(|(_, _, v)| v.resblock == ResBlockVariant::LinearRelu));
    }
}
