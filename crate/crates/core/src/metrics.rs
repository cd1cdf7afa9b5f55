//! Spectral summaries of a matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::ObservationSet;

/// Singular values below this fraction of the largest are ignored by
/// [`effective_rank`].
pub const EFFECTIVE_RANK_CUTOFF: f64 = 1e-12;

/// Singular values in descending order.
pub fn spectrum(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn nonzero_top(s: &[f64]) -> Result<f64> {
    match s.first() {
        Some(&top) if top > 0.0 && top.is_finite() => Ok(top),
        _ => Err(Error::ZeroMatrix),
    }
}

/// `||M||_F^2 / ||M||_2^2` computed from a descending spectrum.
pub fn stable_rank_from_spectrum(s: &[f64]) -> Result<f64> {
    let top = nonzero_top(s)?;
    Ok(s.iter().map(|v| (v / top) * (v / top)).sum())
}

/// Entropy-based effective rank computed from a descending spectrum.
pub fn effective_rank_from_spectrum(s: &[f64]) -> Result<f64> {
    let top = nonzero_top(s)?;
    let kept: Vec<f64> = s.iter().copied().filter(|&v| v >= EFFECTIVE_RANK_CUTOFF * top).collect();
    let total: f64 = kept.iter().sum();
    let entropy: f64 = kept
        .iter()
        .map(|&v| {
            let p = v / total;
            -p * p.ln()
        })
        .sum();
    Ok(entropy.exp())
}

/// Stable rank `||M||_F^2 / ||M||_2^2`.
pub fn stable_rank(m: &DMatrix<f64>) -> Result<f64> {
    stable_rank_from_spectrum(&spectrum(m))
}

/// `exp` of the Shannon entropy of the normalized singular values.
pub fn effective_rank(m: &DMatrix<f64>) -> Result<f64> {
    effective_rank_from_spectrum(&spectrum(m))
}

/// Which entries enter [`reconstruction_error`].
#[derive(Debug, Clone, Copy)]
pub enum ErrorScope<'a> {
    All,
    /// Only positions absent from the given observation set.
    Unobserved(&'a ObservationSet),
}

/// Relative Frobenius error `||W - W*|| / ||W*||` over the chosen entries.
pub fn reconstruction_error(w: &DMatrix<f64>, truth: &DMatrix<f64>, scope: ErrorScope<'_>) -> Result<f64> {
    if w.shape() != truth.shape() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {:?}, ground truth is {:?}",
            w.shape(),
            truth.shape()
        )));
    }
    let (num, den) = match scope {
        ErrorScope::All => ((w - truth).norm_squared(), truth.norm_squared()),
        ErrorScope::Unobserved(obs) => {
            let mut num = 0.0;
            let mut den = 0.0;
            for j in 0..truth.ncols() {
                for i in 0..truth.nrows() {
                    if !obs.contains(i, j) {
                        num += (w[(i, j)] - truth[(i, j)]).powi(2);
                        den += truth[(i, j)].powi(2);
                    }
                }
            }
            (num, den)
        }
    };
    if den == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok((num / den).sqrt())
}

/// Everything the trajectory recorder stores about one matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub singular_values: Vec<f64>,
    pub stable_rank: f64,
    pub effective_rank: f64,
}

/// Spectrum plus both rank measures. A zero matrix reports ranks of 0.
pub fn summarize(m: &DMatrix<f64>) -> SpectrumSummary {
    let s = spectrum(m);
    SpectrumSummary {
        stable_rank: stable_rank_from_spectrum(&s).unwrap_or(0.0),
        effective_rank: effective_rank_from_spectrum(&s).unwrap_or(0.0),
        singular_values: s,
    }
}
