//! Gradient flow restricted to the block-structured family.
//!
//! When every factor starts as the same matrix with entries `a` on the
//! diagonal, `b` elsewhere inside a diagonal block and `c` outside the blocks,
//! and the observations are the diagonal blocks with a common target, the
//! flow never leaves that family. Its state is then captured by three
//! eigenvalues: `l1` on the all-ones direction, `l2` on block-constant
//! directions orthogonal to it, and `l3` on directions summing to zero inside
//! every block.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ode::{drive, OdeSystem, Outcome};
use super::{default_step, IntegratorConfig};
use crate::error::{Error, Result};
use crate::init::Sharpness;
use crate::observation::BlockSpec;

/// The three distinct eigenvalues of a block-structured factor. With blocks
/// of size one there is no in-block direction and `l3` has no effect on the
/// product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenState {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

/// Eigenvalues of the factor `alpha` on the diagonal, `alpha / m` elsewhere.
pub fn eigen_state_of_alpha_m(alpha: f64, m: Sharpness, spec: &BlockSpec) -> EigenState {
    let off = alpha * m.reciprocal();
    let d = spec.dim() as f64;
    EigenState { l1: alpha + (d - 1.0) * off, l2: alpha - off, l3: alpha - off }
}

/// Reads the family parameters off a factor and returns its eigenvalues.
/// Fails if `w` is not of the block-structured form.
pub fn eigen_state_of_factor(w: &DMatrix<f64>, spec: &BlockSpec) -> Result<EigenState> {
    let (s, n) = (spec.block_size, spec.blocks);
    if w.nrows() != spec.dim() || w.ncols() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "factor is {}x{}, block layout needs {}x{}",
            w.nrows(),
            w.ncols(),
            spec.dim(),
            spec.dim()
        )));
    }
    let a = w[(0, 0)];
    let b = if s > 1 { w[(0, 1)] } else { 0.0 };
    let c = if n > 1 { w[(0, s)] } else { 0.0 };
    let scale = w.amax().max(f64::MIN_POSITIVE);
    for j in 0..spec.dim() {
        for i in 0..spec.dim() {
            let expect = if i == j {
                a
            } else if spec.block_of(i) == spec.block_of(j) {
                b
            } else {
                c
            };
            if (w[(i, j)] - expect).abs() > 1e-9 * scale {
                return Err(Error::InvalidParameter(format!("factor is not block structured at ({i}, {j})")));
            }
        }
    }
    let (sf, nf) = (s as f64, n as f64);
    Ok(EigenState { l1: a + (sf - 1.0) * b + sf * (nf - 1.0) * c, l2: a + (sf - 1.0) * b - sf * c, l3: a - b })
}

/// Entries of the end-to-end matrix: `diag` on the diagonal, `in_block`
/// elsewhere inside a block, `off_block` outside the blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductEntries {
    pub diag: f64,
    pub in_block: f64,
    pub off_block: f64,
}

pub fn product_entries(state: &EigenState, depth: usize, spec: &BlockSpec) -> ProductEntries {
    let l = depth as i32;
    let (s, n) = (spec.block_size as f64, spec.blocks as f64);
    let (p1, p2, p3) = (state.l1.powi(l), state.l2.powi(l), state.l3.powi(l));
    ProductEntries {
        diag: (p1 + (n - 1.0) * p2 + n * (s - 1.0) * p3) / (s * n),
        in_block: (p1 + (n - 1.0) * p2 - n * p3) / (s * n),
        off_block: (p1 - p2) / (s * n),
    }
}

/// Loss of the end-to-end matrix on the block observations.
pub fn reduced_loss(state: &EigenState, depth: usize, spec: &BlockSpec) -> f64 {
    let p = product_entries(state, depth, spec);
    let (s, n, w) = (spec.block_size as f64, spec.blocks as f64, spec.target);
    0.5 * n * (s * (p.diag - w).powi(2) + s * (s - 1.0) * (p.in_block - w).powi(2))
}

/// `l1 / l2` at depth two, `l1^(2-L) - l2^(2-L)` at larger depth. Both are
/// constant along the flow.
pub fn conserved_quantity(state: &EigenState, depth: usize) -> f64 {
    if depth == 2 {
        state.l1 / state.l2
    } else {
        let e = 2.0 - depth as f64;
        state.l1.powf(e) - state.l2.powf(e)
    }
}

/// Exact solution for `l3`, which evolves as `l3' = -l3^(2L-1)`.
pub fn lambda3_closed_form(l3_initial: f64, depth: usize, t: f64) -> f64 {
    if depth == 1 {
        return l3_initial * (-t).exp();
    }
    let k = 2.0 * depth as f64 - 2.0;
    l3_initial.signum() * (k * t + l3_initial.abs().powf(-k)).powf(-1.0 / k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSample {
    pub t: f64,
    pub state: EigenState,
    pub loss: f64,
    /// Deviation of [`conserved_quantity`] from its initial value, relative
    /// to that value when it is nonzero.
    pub conserved_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedTrajectory {
    pub samples: Vec<ReducedSample>,
    pub outcome: Outcome,
    pub steps: usize,
}

impl ReducedTrajectory {
    pub fn final_state(&self) -> EigenState {
        self.samples.last().expect("trajectories always hold the initial sample").state
    }
}

struct ReducedFlow {
    spec: BlockSpec,
    depth: usize,
}

impl OdeSystem for ReducedFlow {
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let l = self.depth as i32;
        let (s, n) = (self.spec.block_size as f64, self.spec.blocks as f64);
        let gamma = (y[0].powi(l) + (n - 1.0) * y[1].powi(l)) / n - s * self.spec.target;
        dy[0] = -gamma * y[0].powi(l - 1);
        dy[1] = -gamma * y[1].powi(l - 1);
        dy[2] = -y[2].powi(2 * l - 1);
    }

    fn loss(&self, y: &[f64]) -> f64 {
        reduced_loss(&EigenState { l1: y[0], l2: y[1], l3: y[2] }, self.depth, &self.spec)
    }
}

/// Integrates the three-eigenvalue system from `init`.
pub fn integrate_reduced_eigen(
    spec: &BlockSpec,
    depth: usize,
    init: EigenState,
    cfg: &IntegratorConfig,
) -> Result<ReducedTrajectory> {
    spec.validate()?;
    cfg.validate()?;
    if depth < 2 {
        return Err(Error::InvalidParameter("the reduced system needs depth at least 2".into()));
    }
    let l = depth as i32;
    let product_norm = {
        let (s, n) = (spec.block_size as f64, spec.blocks as f64);
        (init.l1.powi(2 * l) + (n - 1.0) * init.l2.powi(2 * l) + n * (s - 1.0) * init.l3.powi(2 * l)).sqrt()
    };
    let step = cfg.step.unwrap_or_else(|| default_step(&DMatrix::from_element(1, 1, product_norm), depth));
    let q0 = conserved_quantity(&init, depth);
    let sys = ReducedFlow { spec: *spec, depth };
    let mut samples = Vec::new();
    let result = drive(&sys, vec![init.l1, init.l2, init.l3], &cfg.driver(step), |t, y, loss| {
        let state = EigenState { l1: y[0], l2: y[1], l3: y[2] };
        let dq = (conserved_quantity(&state, depth) - q0).abs();
        let conserved_drift = if q0 != 0.0 { dq / q0.abs() } else { dq };
        samples.push(ReducedSample { t, state, loss, conserved_drift });
    })?;
    Ok(ReducedTrajectory { samples, outcome: result.outcome, steps: result.steps })
}
