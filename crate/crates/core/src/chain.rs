use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::ObservationSet;

/// Square factors `W_1, ..., W_L` of a deep linear factorization.
///
/// `factors()[0]` is `W_1`, the factor applied first. The end-to-end matrix
/// is `W_L * ... * W_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorChain {
    factors: Vec<DMatrix<f64>>,
}

impl FactorChain {
    pub fn new(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        let first =
            factors.first().ok_or_else(|| Error::InvalidParameter("a chain needs at least one factor".into()))?;
        let d = first.nrows();
        if d == 0 {
            return Err(Error::InvalidParameter("factors must be non-empty".into()));
        }
        for (l, w) in factors.iter().enumerate() {
            if w.nrows() != d || w.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "factor {} is {}x{}, expected {d}x{d}",
                    l + 1,
                    w.nrows(),
                    w.ncols()
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("factor {} has non-finite entries", l + 1)));
            }
        }
        Ok(Self { factors })
    }

    /// Skips validation; callers guarantee square, equally sized factors.
    pub(crate) fn from_factors_unchecked(factors: Vec<DMatrix<f64>>) -> Self {
        Self { factors }
    }

    pub fn depth(&self) -> usize {
        self.factors.len()
    }

    pub fn dim(&self) -> usize {
        self.factors[0].nrows()
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<DMatrix<f64>> {
        self.factors
    }

    /// End-to-end matrix `W_L * ... * W_1`.
    pub fn product(&self) -> DMatrix<f64> {
        let mut acc = self.factors[0].clone();
        for w in &self.factors[1..] {
            acc = w * acc;
        }
        acc
    }

    /// `pre[l] = W_{l-1} * ... * W_1` with `pre[0] = I` (0-based `l`).
    pub fn prefix_products(&self) -> Vec<DMatrix<f64>> {
        let d = self.dim();
        let mut pre = Vec::with_capacity(self.depth());
        pre.push(DMatrix::identity(d, d));
        for l in 1..self.depth() {
            let next = &self.factors[l - 1] * &pre[l - 1];
            pre.push(next);
        }
        pre
    }

    /// `suf[l] = W_L * ... * W_{l+1}` with `suf[L-1] = I` (0-based `l`).
    pub fn suffix_products(&self) -> Vec<DMatrix<f64>> {
        let d = self.dim();
        let depth = self.depth();
        let mut suf = vec![DMatrix::identity(d, d); depth];
        for l in (0..depth.saturating_sub(1)).rev() {
            suf[l] = &suf[l + 1] * &self.factors[l + 1];
        }
        suf
    }

    /// `W_{l+1}^T W_{l+1} - W_l W_l^T` for each adjacent pair. These are
    /// constant along exact gradient flow.
    pub fn balance_matrices(&self) -> Vec<DMatrix<f64>> {
        self.factors.windows(2).map(|p| p[1].transpose() * &p[1] - &p[0] * p[0].transpose()).collect()
    }

    /// Sum of squared Frobenius norms of all factors.
    pub fn squared_norm(&self) -> f64 {
        self.factors.iter().map(|w| w.norm_squared()).sum()
    }

    /// Column-major concatenation of all factors, `W_1` first.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.depth() * self.dim() * self.dim());
        for w in &self.factors {
            v.extend_from_slice(w.as_slice());
        }
        v
    }

    /// Inverse of [`FactorChain::to_flat`].
    pub fn from_flat(dim: usize, depth: usize, flat: &[f64]) -> Result<Self> {
        let block = dim * dim;
        if flat.len() != block * depth || depth == 0 {
            return Err(Error::DimensionMismatch(format!(
                "flat state has {} values, expected {}",
                flat.len(),
                block * depth
            )));
        }
        let factors = flat.chunks(block).map(|c| DMatrix::from_column_slice(dim, dim, c)).collect();
        Self::new(factors)
    }

    fn check_compatible(&self, obs: &ObservationSet) -> Result<()> {
        if obs.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "chain is {d}x{d} but observations index a {o}x{o} matrix",
                d = self.dim(),
                o = obs.dim()
            )));
        }
        Ok(())
    }
}

/// Squared-error loss `1/2 * sum over observed (w_ij - w*_ij)^2`.
pub fn loss(chain: &FactorChain, obs: &ObservationSet) -> Result<f64> {
    chain.check_compatible(obs)?;
    Ok(loss_of_product(&chain.product(), obs))
}

pub(crate) fn loss_of_product(x: &DMatrix<f64>, obs: &ObservationSet) -> f64 {
    0.5 * obs
        .iter()
        .map(|e| {
            let r = x[(e.row, e.col)] - e.target;
            r * r
        })
        .sum::<f64>()
}

/// Gradients of [`loss`] with respect to every factor, in chain order.
///
/// The gradient for `W_l` is `(W_L...W_{l+1})^T R (W_{l-1}...W_1)^T`, where `R`
/// is the masked residual of the end-to-end matrix.
pub fn layer_gradients(chain: &FactorChain, obs: &ObservationSet) -> Result<Vec<DMatrix<f64>>> {
    chain.check_compatible(obs)?;
    obs.require_non_empty()?;
    Ok(gradients_and_loss(chain, obs).0)
}

/// Gradients plus the loss, sharing one pass over the partial products.
pub(crate) fn gradients_and_loss(chain: &FactorChain, obs: &ObservationSet) -> (Vec<DMatrix<f64>>, f64) {
    let pre = chain.prefix_products();
    let suf = chain.suffix_products();
    let product = &suf[0] * &chain.factors()[0];
    let r = obs.residual(&product);
    let loss = 0.5 * r.norm_squared();
    let grads = (0..chain.depth()).map(|l| suf[l].tr_mul(&r) * pre[l].transpose()).collect();
    (grads, loss)
}
