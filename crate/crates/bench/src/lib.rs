//! Fixtures shared by the criterion benchmarks.

use deepfact_core::{build_init, BlockSpec, FactorChain, InitScheme, ObservationSet, Sharpness};

/// Block observations of size `2 x blocks` with an `alpha`/`m` chain.
pub fn block_problem(blocks: usize, depth: usize) -> (BlockSpec, ObservationSet, FactorChain) {
    let spec = BlockSpec::new(2, blocks, 1.0).expect("valid block layout");
    let obs = deepfact_core::build_observation_block(&spec).expect("valid observations");
    let chain = build_init(&InitScheme::AlphaM { alpha: 0.1, m: Sharpness::Finite(5.0) }, depth, spec.dim())
        .expect("valid init");
    (spec, obs, chain)
}

/// Random Gaussian chain with every third entry observed.
pub fn dense_problem(dim: usize, depth: usize) -> (ObservationSet, FactorChain) {
    let chain = build_init(&InitScheme::Gaussian { std: 0.3, seed: 11 }, depth, dim).expect("valid init");
    let truth = deepfact_core::DMatrix::from_fn(dim, dim, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
    let positions: Vec<_> = (0..dim * dim).filter(|k| k % 3 == 0).map(|k| (k / dim, k % dim)).collect();
    let obs = ObservationSet::from_positions(&truth, &positions).expect("valid observations");
    (obs, chain)
}
