//! Continuous-time gradient flow, its discrete gradient-descent counterpart,
//! and the three-variable eigenvalue system for block-structured problems.

mod ode;
mod reduced;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::{gradients_and_loss, loss_of_product, FactorChain};
use crate::error::{Error, Result};
use crate::metrics::summarize;
use crate::observation::ObservationSet;

pub use ode::{Method, Outcome, MIN_STEP};
pub use reduced::{
    conserved_quantity, eigen_state_of_alpha_m, eigen_state_of_factor, integrate_reduced_eigen, lambda3_closed_form,
    product_entries, reduced_loss, EigenState, ProductEntries, ReducedSample, ReducedTrajectory,
};

use ode::{drive, DriverSettings, OdeSystem};

/// Settings for [`integrate_gradient_flow`] and [`integrate_reduced_eigen`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Initial step. `None` picks `1e-3 / (1 + ||W(0)||_F^(2 - 2/L))` from the
    /// end-to-end matrix at the start.
    pub step: Option<f64>,
    /// Step-doubling error control plus rejection of loss-increasing steps.
    pub adaptive: bool,
    /// Local error tolerance relative to the largest state component.
    pub tolerance: f64,
    pub t_max: f64,
    pub stop_loss: f64,
    /// Record a sample every this many accepted steps (0 records only the
    /// endpoints).
    pub record_every: usize,
    /// Store a copy of the factors in every sample.
    pub keep_states: bool,
    /// Consecutive rejected steps tolerated before reporting a step collapse.
    pub max_rejections: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            step: None,
            adaptive: true,
            tolerance: 1e-10,
            t_max: 1e4,
            stop_loss: 1e-12,
            record_every: 100,
            keep_states: false,
            max_rejections: 60,
        }
    }
}

impl IntegratorConfig {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if let Some(h) = self.step {
            if !(h.is_finite() && h > 0.0) {
                return bad("integrator step must be positive");
            }
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return bad("t_max must be positive and finite");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.stop_loss >= 0.0) {
            return bad("stop_loss must be non-negative");
        }
        Ok(())
    }

    fn driver(&self, step: f64) -> DriverSettings {
        DriverSettings {
            method: self.method,
            step,
            adaptive: self.adaptive,
            tolerance: self.tolerance,
            t_max: self.t_max,
            stop_loss: self.stop_loss,
            record_every: self.record_every,
            max_rejections: self.max_rejections,
        }
    }
}

/// Default initial step for a chain whose end-to-end matrix is `product`.
pub fn default_step(product: &DMatrix<f64>, depth: usize) -> f64 {
    let exponent = 2.0 - 2.0 / depth as f64;
    1e-3 / (1.0 + product.norm().powf(exponent))
}

/// One recorded point along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub loss: f64,
    /// Descending singular values of the end-to-end matrix.
    pub singular_values: Vec<f64>,
    pub stable_rank: f64,
    pub effective_rank: f64,
    /// Largest Frobenius deviation of any balance matrix from its initial value.
    pub balance_drift: f64,
    pub state: Option<FactorChain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub final_chain: FactorChain,
    pub outcome: Outcome,
    /// Accepted integration steps or descent iterations.
    pub steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.loss).collect()
    }

    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("trajectories always hold the initial sample")
    }

    pub fn converged(&self) -> bool {
        self.outcome == Outcome::Converged
    }
}

struct SampleRecorder {
    initial_balance: Vec<DMatrix<f64>>,
    keep_states: bool,
    samples: Vec<Sample>,
}

impl SampleRecorder {
    fn new(chain: &FactorChain, keep_states: bool) -> Self {
        Self { initial_balance: chain.balance_matrices(), keep_states, samples: Vec::new() }
    }

    fn push(&mut self, t: f64, chain: &FactorChain, loss: f64) {
        let summary = summarize(&chain.product());
        let balance_drift = chain
            .balance_matrices()
            .iter()
            .zip(&self.initial_balance)
            .map(|(now, start)| (now - start).norm())
            .fold(0.0, f64::max);
        self.samples.push(Sample {
            t,
            loss,
            singular_values: summary.singular_values,
            stable_rank: summary.stable_rank,
            effective_rank: summary.effective_rank,
            balance_drift,
            state: self.keep_states.then(|| chain.clone()),
        });
    }
}

fn check_problem(chain: &FactorChain, obs: &ObservationSet) -> Result<()> {
    obs.require_non_empty()?;
    if chain.dim() != obs.dim() {
        return Err(Error::DimensionMismatch(format!(
            "chain is {}x{} but observations index a {}x{} matrix",
            chain.dim(),
            chain.dim(),
            obs.dim(),
            obs.dim()
        )));
    }
    Ok(())
}

struct FullFlow<'a> {
    obs: &'a ObservationSet,
    dim: usize,
    depth: usize,
}

impl FullFlow<'_> {
    fn chain(&self, y: &[f64]) -> FactorChain {
        let block = self.dim * self.dim;
        FactorChain::from_factors_unchecked(
            y.chunks(block).map(|c| DMatrix::from_column_slice(self.dim, self.dim, c)).collect(),
        )
    }
}

impl OdeSystem for FullFlow<'_> {
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let (grads, _) = gradients_and_loss(&self.chain(y), self.obs);
        let block = self.dim * self.dim;
        for (l, g) in grads.iter().enumerate() {
            for (dst, src) in dy[l * block..(l + 1) * block].iter_mut().zip(g.as_slice()) {
                *dst = -src;
            }
        }
        debug_assert_eq!(grads.len(), self.depth);
    }

    fn loss(&self, y: &[f64]) -> f64 {
        loss_of_product(&self.chain(y).product(), self.obs)
    }
}

/// Integrates `W_l' = -dLoss/dW_l` for every factor from `init`.
///
/// Running out of time is not an error: the trajectory comes back with
/// [`Outcome::NotConverged`]. A step that cannot be made small enough to
/// keep the loss from rising is reported as [`Error::StepCollapse`].
pub fn integrate_gradient_flow(init: &FactorChain, obs: &ObservationSet, cfg: &IntegratorConfig) -> Result<Trajectory> {
    check_problem(init, obs)?;
    cfg.validate()?;
    let step = cfg.step.unwrap_or_else(|| default_step(&init.product(), init.depth()));
    let sys = FullFlow { obs, dim: init.dim(), depth: init.depth() };
    let mut recorder = SampleRecorder::new(init, cfg.keep_states);
    let result = drive(&sys, init.to_flat(), &cfg.driver(step), |t, y, loss| recorder.push(t, &sys.chain(y), loss))?;
    Ok(Trajectory {
        samples: recorder.samples,
        final_chain: sys.chain(&result.y),
        outcome: result.outcome,
        steps: result.steps,
    })
}

/// Settings for [`run_gradient_descent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub step_size: f64,
    pub max_iters: usize,
    pub stop_loss: f64,
    /// Record every this many iterations (0 records only the endpoints).
    pub record_every: usize,
    pub keep_states: bool,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self { step_size: 1e-3, max_iters: 1_000_000, stop_loss: 1e-12, record_every: 1000, keep_states: false }
    }
}

/// Plain gradient descent `W_l <- W_l - eta * dLoss/dW_l`.
///
/// Sample times are `iteration * eta`, so the trajectory is directly
/// comparable with the continuous flow.
pub fn run_gradient_descent(init: &FactorChain, obs: &ObservationSet, cfg: &GdConfig) -> Result<Trajectory> {
    check_problem(init, obs)?;
    if !(cfg.step_size.is_finite() && cfg.step_size > 0.0) {
        return Err(Error::InvalidParameter("step size must be positive".into()));
    }
    let eta = cfg.step_size;
    let mut factors = init.factors().to_vec();
    let mut recorder = SampleRecorder::new(init, cfg.keep_states);
    let mut iter = 0usize;
    let mut last_recorded = usize::MAX;
    let outcome = loop {
        let chain = FactorChain::from_factors_unchecked(factors);
        let (grads, loss) = gradients_and_loss(&chain, obs);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("loss diverged at iteration {iter}")));
        }
        let due = iter == 0 || (cfg.record_every > 0 && iter.is_multiple_of(cfg.record_every));
        let done = loss <= cfg.stop_loss || iter >= cfg.max_iters;
        if due || done {
            recorder.push(iter as f64 * eta, &chain, loss);
            last_recorded = iter;
        }
        factors = chain.into_factors();
        if loss <= cfg.stop_loss {
            break Outcome::Converged;
        }
        if iter >= cfg.max_iters {
            break Outcome::NotConverged;
        }
        for (w, g) in factors.iter_mut().zip(&grads) {
            for (x, dx) in w.iter_mut().zip(g.iter()) {
                *x -= eta * dx;
            }
        }
        iter += 1;
    };
    debug_assert_eq!(last_recorded, iter);
    Ok(Trajectory {
        samples: recorder.samples,
        final_chain: FactorChain::from_factors_unchecked(factors),
        outcome,
        steps: iter,
    })
}
