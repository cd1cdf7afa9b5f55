//! Scalar bounds for two-by-two depth-two problems.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_two_by_two(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.shape() != (2, 2) {
        return Err(Error::DimensionMismatch(format!("{name} must be 2x2, got {:?}", m.shape())));
    }
    Ok(())
}

/// Squared sine of the angle between row `i` of `A` and the first column of
/// `B`.
pub fn alignment_ratio(a: &DMatrix<f64>, b: &DMatrix<f64>, i: usize) -> Result<f64> {
    check_two_by_two(a, "A")?;
    check_two_by_two(b, "B")?;
    if i > 1 {
        return Err(Error::IndexOutOfRange { row: i, col: 0, dim: 2 });
    }
    let u = b.column(0);
    let un = u.norm();
    let row = a.row(i).transpose();
    let rn2 = row.norm_squared();
    if un == 0.0 || rn2 == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let along = row.dot(&u) / un;
    Ok(((rn2 - along * along) / rn2).max(0.0))
}

/// Upper bound on [`alignment_ratio`] at convergence when the first column
/// `(w11, w21)` is observed, given the initial factors.
pub fn alignment_bound(a0: &DMatrix<f64>, b0: &DMatrix<f64>, w11: f64, w21: f64, i: usize) -> Result<f64> {
    check_two_by_two(a0, "A")?;
    check_two_by_two(b0, "B")?;
    let wi = match i {
        0 => w11,
        1 => w21,
        _ => return Err(Error::IndexOutOfRange { row: i, col: 0, dim: 2 }),
    };
    if wi == 0.0 {
        return Err(Error::InvalidParameter("observed targets must be nonzero".into()));
    }
    let b1 = b0.column(0).norm_squared();
    let root = (b1 * b1 + 4.0 * w11 * w11 + 4.0 * w21 * w21).sqrt();
    Ok(a0.norm_squared() * (root + b1) / (2.0 * wi * wi))
}

/// Guarantees for resuming training from `A = B = sqrt(w*) I` after the
/// off-diagonal entry `(0, 1)` is revealed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasticityBounds {
    /// `w12^2 / 2`.
    pub envelope_coefficient: f64,
    /// `2 w*`.
    pub decay_rate: f64,
    /// `1 + exp(-8 w12 / w*)`.
    pub srank_lower: f64,
}

impl PlasticityBounds {
    /// Loss bound `t` time units after training resumes.
    pub fn loss_envelope(&self, t: f64) -> f64 {
        self.envelope_coefficient * (-self.decay_rate * t).exp()
    }
}

pub fn plasticity_bounds_2x2(w_diag: f64, w12: f64) -> Result<PlasticityBounds> {
    if !(w_diag > 0.0 && w_diag.is_finite()) || !(w12 > 0.0 && w12.is_finite()) {
        return Err(Error::InvalidParameter(format!("targets must be positive, got w* = {w_diag}, w12 = {w12}")));
    }
    Ok(PlasticityBounds {
        envelope_coefficient: 0.5 * w12 * w12,
        decay_rate: 2.0 * w_diag,
        srank_lower: 1.0 + (-8.0 * w12 / w_diag).exp(),
    })
}
