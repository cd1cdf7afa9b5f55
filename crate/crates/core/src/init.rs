use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::chain::FactorChain;
use crate::error::{Error, Result};

/// Diagonal-to-off-diagonal ratio `m` of an [`InitScheme::AlphaM`] factor.
/// `Infinite` means the off-diagonal entries are exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sharpness {
    Finite(f64),
    Infinite,
}

impl Sharpness {
    /// `1/m`, which is `0` for the infinite tag.
    pub fn reciprocal(self) -> f64 {
        match self {
            Sharpness::Finite(m) => 1.0 / m,
            Sharpness::Infinite => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Sharpness::Infinite)
    }

    pub fn validate(self) -> Result<()> {
        match self {
            Sharpness::Finite(m) if !(m.is_finite() && m > 1.0) => {
                Err(Error::InvalidParameter(format!("m must exceed 1 (use the infinite tag for m = inf), got {m}")))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for Sharpness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sharpness::Finite(m) => write!(f, "{m}"),
            Sharpness::Infinite => write!(f, "inf"),
        }
    }
}

/// How the factors of a chain are initialized. Every layer of a scheme
/// except `Gaussian` and `Explicit` receives the same matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitScheme {
    /// `alpha` on the diagonal, `alpha / m` everywhere else.
    AlphaM { alpha: f64, m: Sharpness },
    /// `alpha * I`.
    Identity { alpha: f64 },
    /// Every entry equal to `alpha`.
    AllOnes { alpha: f64 },
    /// I.i.d. `N(0, std^2)` entries drawn from a seeded stream, layer by
    /// layer and row-major within a layer.
    Gaussian { std: f64, seed: u64 },
    /// Caller-supplied factors, `W_1` first.
    Explicit(Vec<DMatrix<f64>>),
}

fn check_scale(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Materializes `scheme` as a chain of `depth` square factors of size `dim`.
pub fn build_init(scheme: &InitScheme, depth: usize, dim: usize) -> Result<FactorChain> {
    if depth == 0 || dim == 0 {
        return Err(Error::InvalidParameter("depth and dimension must be positive".into()));
    }
    let same = |w: DMatrix<f64>| FactorChain::new(vec![w; depth]);
    match scheme {
        InitScheme::AlphaM { alpha, m } => {
            check_scale("alpha", *alpha)?;
            m.validate()?;
            let off = alpha * m.reciprocal();
            same(DMatrix::from_fn(dim, dim, |i, j| if i == j { *alpha } else { off }))
        }
        InitScheme::Identity { alpha } => {
            check_scale("alpha", *alpha)?;
            same(DMatrix::identity(dim, dim) * *alpha)
        }
        InitScheme::AllOnes { alpha } => {
            check_scale("alpha", *alpha)?;
            same(DMatrix::from_element(dim, dim, *alpha))
        }
        InitScheme::Gaussian { std, seed } => {
            check_scale("std", *std)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let factors = (0..depth)
                .map(|_| {
                    let vals: Vec<f64> = (0..dim * dim)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            std * z
                        })
                        .collect();
                    DMatrix::from_row_slice(dim, dim, &vals)
                })
                .collect();
            FactorChain::new(factors)
        }
        InitScheme::Explicit(factors) => {
            if factors.len() != depth {
                return Err(Error::DimensionMismatch(format!(
                    "explicit init has {} factors, depth is {depth}",
                    factors.len()
                )));
            }
            let chain = FactorChain::new(factors.clone())?;
            if chain.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "explicit factors are {}x{}, expected {dim}x{dim}",
                    chain.dim(),
                    chain.dim()
                )));
            }
            Ok(chain)
        }
    }
}
