//! Planted-signal synthetic cohort and a deterministic embedding stub.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

pub const INFORMATIVE_PREFIX: &str = "inf_";
pub const NUISANCE_PREFIX: &str = "nui_";
pub const NOISE_PREFIX: &str = "noise_";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub informative: usize,
    pub nuisance: usize,
    pub seed: u64,
    /// Distance between the class means of each informative feature.
    pub shift: f64,
    /// Strength of the `sign(inf_0)` interaction planted on `inf_1`.
    pub interaction: f64,
    pub embed_dim: usize,
}

impl SynthConfig {
    pub fn new(n: usize, informative: usize, nuisance: usize, seed: u64) -> Self {
        Self {
            n,
            informative,
            nuisance,
            seed,
            shift: 1.0,
            interaction: 0.5,
            embed_dim: 10,
        }
    }

    /// The header comment written above the generated CSV.
    pub fn describe(&self) -> Vec<String> {
        vec![
            "synthetic planted-signal cohort".into(),
            format!(
                "n = {}, informative = {}, nuisance = {}, seed = {}",
                self.n, self.informative, self.nuisance, self.seed
            ),
            format!(
                "inf_j ~ N(0,1) + shift*(2y-1)/2 with shift = {}; inf_1 += interaction*(2y-1)*sign(inf_0) with interaction = {}",
                self.shift, self.interaction
            ),
            format!("nui_j ~ N(0,1) independent of y; emb_0..emb_{} from the id hash", self.embed_dim.max(1) - 1),
        ]
    }
}

pub fn synth_generate(config: &SynthConfig) -> Result<Dataset> {
    if config.n < 100 {
        return Err(Error::Precondition(format!("synthetic cohort needs n >= 100, got {}", config.n)));
    }
    let f = config.informative + config.nuisance;
    if f == 0 {
        return Err(Error::Precondition("synthetic cohort needs at least one feature".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut labels: Vec<f64> = (0..config.n).map(|i| (i % 2) as f64).collect();
    labels.shuffle(&mut rng);

    let mut data = Vec::with_capacity(config.n * f);
    for &y in &labels {
        let sign = 2.0 * y - 1.0;
        let start = data.len();
        for _ in 0..config.informative {
            let z: f64 = rng.sample(StandardNormal);
            data.push(z + config.shift * sign / 2.0);
        }
        if config.informative >= 2 {
            let s = if data[start] >= 0.0 { 1.0 } else { -1.0 };
            data[start + 1] += config.interaction * sign * s;
        }
        for _ in 0..config.nuisance {
            data.push(rng.sample::<f64, _>(StandardNormal));
        }
    }

    let mut names: Vec<String> = (0..config.informative)
        .map(|i| format!("{INFORMATIVE_PREFIX}{i}"))
        .collect();
    names.extend((0..config.nuisance).map(|i| format!("{NUISANCE_PREFIX}{i}")));
    let ids: Vec<String> = (0..config.n).map(|i| format!("s{i:05}")).collect();
    let mut embed = Vec::with_capacity(config.n * config.embed_dim);
    for id in &ids {
        embed.extend(embed_stub(id, config.embed_dim));
    }
    Dataset::new(
        names,
        Matrix::from_vec(config.n, f, data)?,
        labels,
        Matrix::from_vec(config.n, config.embed_dim, embed)?,
        Some(ids),
    )
}

/// Stand-in for an image embedding: `E` values in `[0, 1)` derived from a
/// SHA-256 of the identifier.
pub fn embed_stub(id: &str, dim: usize) -> Vec<f64> {
    let digest = Sha256::new()
        .chain_update(b"selnet-embed\0")
        .chain_update(id.as_bytes())
        .finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(seed);
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

/// `count` uniform `[0, 1)` columns named `noise_0..`.
pub fn noise_columns(rows: usize, count: usize, seed: u64) -> (Vec<String>, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * count).map(|_| rng.random::<f64>()).collect();
    let names = (0..count).map(|i| format!("{NOISE_PREFIX}{i}")).collect();
    (names, Matrix::from_vec(rows, count, data).expect("sized"))
}
