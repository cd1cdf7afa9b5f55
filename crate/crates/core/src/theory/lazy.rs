//! Lazy-training quantities for depth-two factorizations `W = A B`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::loss_of_product;
use crate::error::{Error, Result};
use crate::observation::ObservationSet;

/// Jacobian of the observed predictions with respect to
/// `Theta = [A; B^T]`, vectorized column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    /// `N x 2d^2`, one row per observation in row-major observation order.
    pub matrix: DMatrix<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `sigma_min^6 / (1152 d sigma_max^2)`.
    pub lazy_threshold: f64,
    /// Loss of `A B` on the observations.
    pub loss: f64,
    /// Whether `loss <= lazy_threshold`.
    pub condition_holds: bool,
}

pub fn jacobian(a: &DMatrix<f64>, b: &DMatrix<f64>, obs: &ObservationSet) -> Result<JacobianReport> {
    obs.require_non_empty()?;
    let d = obs.dim();
    if a.shape() != (d, d) || b.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "factors must be {d}x{d}, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let rows = 2 * d;
    let mut j = DMatrix::zeros(obs.len(), rows * d);
    for (n, e) in obs.iter().enumerate() {
        for k in 0..d {
            // Upper block: row `i` of X_n B^T is column `j` of B.
            j[(n, k * rows + e.row)] = b[(k, e.col)];
            // Lower block: row `j` of X_n^T A is row `i` of A.
            j[(n, k * rows + d + e.col)] = a[(e.row, k)];
        }
    }
    let sv = j.clone().svd(false, false).singular_values;
    let sigma_max = sv.max();
    let sigma_min = sv.min();
    let lazy_threshold = sigma_min.powi(6) / (1152.0 * d as f64 * sigma_max * sigma_max);
    let loss = loss_of_product(&(a * b), obs);
    Ok(JacobianReport {
        matrix: j,
        sigma_min,
        sigma_max,
        lazy_threshold,
        loss,
        condition_holds: loss <= lazy_threshold,
    })
}

/// Loss envelope `loss0 * exp(-sigma_min^2 t / 2)` for lazy training.
pub fn lazy_loss_envelope(loss0: f64, sigma_min: f64, t: f64) -> f64 {
    loss0 * (-0.5 * sigma_min * sigma_min * t).exp()
}

/// Lower bound on the stable rank of `A(t)` during lazy training from the
/// state `a_start`:
/// `((||A||_F - delta) / (||A||_2 + delta))^2` with
/// `delta = sigma_min / (4 sqrt(2d))`. A negative numerator makes the
/// bound vacuous and `0` is returned.
pub fn lazy_srank_lower_bound(a_start: &DMatrix<f64>, sigma_min: f64) -> f64 {
    let d = a_start.nrows() as f64;
    let delta = sigma_min / (4.0 * (2.0 * d).sqrt());
    let spectral = a_start.clone().svd(false, false).singular_values.max();
    let num = (a_start.norm() - delta).max(0.0);
    let ratio = num / (spectral + delta);
    ratio * ratio
}
