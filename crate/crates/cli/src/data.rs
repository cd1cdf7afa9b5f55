//! Seeded ground-truth matrices and observation patterns.

use deepfact_core::{BlockSpec, DMatrix, ObservationSet, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ObsMode, TruthKind};

/// Derives an independent stream seed from a base seed and a tag.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    // SplitMix64 finalizer.
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand_distr::Distribution;
    rand_distr::StandardNormal.sample(rng)
}

/// `sum_{k<r} u_k v_k^T` with standard normal vectors, or a constant matrix.
pub fn generate_ground_truth(kind: TruthKind, dim: usize, seed: u64) -> DMatrix<f64> {
    match kind {
        TruthKind::RankR { rank } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = DMatrix::zeros(dim, dim);
            let scale = 1.0 / (rank as f64).sqrt();
            for _ in 0..rank {
                let u: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
                let v: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
                for j in 0..dim {
                    for i in 0..dim {
                        m[(i, j)] += scale * u[i] * v[j];
                    }
                }
            }
            m
        }
        TruthKind::BlockConstant { target } => DMatrix::from_element(dim, dim, target),
    }
}

/// A seeded random ordering of all `dim^2` positions. Prefixes of it give
/// nested uniform samples.
pub fn shuffled_positions(dim: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<usize> = (0..dim * dim).collect();
    cells.shuffle(&mut rng);
    cells.into_iter().map(|k| (k / dim, k % dim)).collect()
}

/// Observation pattern of the given mode, with targets read from `truth`.
pub fn sample_observations(
    truth: &DMatrix<f64>,
    mode: ObsMode,
    count: Option<usize>,
    block_size: Option<usize>,
    seed: u64,
) -> Result<ObservationSet> {
    let d = truth.nrows();
    let positions: Vec<(usize, usize)> = match mode {
        ObsMode::UniformWithoutReplacement => {
            let mut p = shuffled_positions(d, seed);
            p.truncate(count.unwrap_or(d));
            p
        }
        ObsMode::Diagonal => (0..d).map(|i| (i, i)).collect(),
        ObsMode::Block => {
            let s = block_size.unwrap_or(1);
            (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).filter(|&(i, j)| i / s == j / s).collect()
        }
        ObsMode::UpperTriangular => (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect(),
    };
    ObservationSet::from_positions(truth, &positions)
}

/// Block layout implied by a dimension and block size.
pub fn block_spec(dim: usize, block_size: usize, target: f64) -> Result<BlockSpec> {
    BlockSpec::new(block_size, dim / block_size, target)
}
