use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A partition of `0..n` into `k` folds whose sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub folds: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn validation(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every row outside `fold`, in ascending fold order.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect()
    }
}

pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    if n < k {
        return Err(Error::Precondition(format!("cannot split {n} rows into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(FoldSplit { folds })
}
