#![allow(dead_code)]

use deepfact_core::{DMatrix, FactorChain, ObservationSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0))
}

pub fn random_chain(seed: u64, d: usize, depth: usize, scale: f64) -> FactorChain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FactorChain::new((0..depth).map(|_| random_matrix(&mut rng, d, scale)).collect()).unwrap()
}

/// Observes each entry independently with probability `p` (at least one).
pub fn random_observations(seed: u64, d: usize, p: f64) -> ObservationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = random_matrix(&mut rng, d, 1.0);
    let mut pos: Vec<(usize, usize)> = (0..d * d).filter(|_| rng.random::<f64>() < p).map(|k| (k / d, k % d)).collect();
    if pos.is_empty() {
        pos.push((0, 0));
    }
    ObservationSet::from_positions(&truth, &pos).unwrap()
}

/// Applies `f` to a copy of `chain` with one parameter shifted by `h`.
pub fn perturbed(chain: &FactorChain, layer: usize, i: usize, j: usize, h: f64) -> FactorChain {
    let mut f = chain.factors().to_vec();
    f[layer][(i, j)] += h;
    FactorChain::new(f).unwrap()
}
