//! Explicit Runge-Kutta driver shared by the full and reduced flows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A gradient-flow system `y' = f(y)` with a loss that must not increase.
pub(crate) trait OdeSystem {
    fn rhs(&self, y: &[f64], dy: &mut [f64]);
    fn loss(&self, y: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Euler,
    Rk4,
}

impl Method {
    fn order(self) -> i32 {
        match self {
            Method::Euler => 1,
            Method::Rk4 => 4,
        }
    }
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    /// The loss reached the stopping threshold.
    Converged,
    /// The time or iteration budget ran out first.
    NotConverged,
}

/// Loss increases smaller than this are treated as roundoff.
pub(crate) const LOSS_SLACK: f64 = 1e-28;
/// Smallest step the adaptive controller may use.
pub const MIN_STEP: f64 = 1e-15;

pub(crate) struct DriverSettings {
    pub method: Method,
    pub step: f64,
    pub adaptive: bool,
    pub tolerance: f64,
    pub t_max: f64,
    pub stop_loss: f64,
    pub record_every: usize,
    pub max_rejections: usize,
}

pub(crate) struct DriverResult {
    pub y: Vec<f64>,
    pub outcome: Outcome,
    pub steps: usize,
}

fn step_once<S: OdeSystem>(sys: &S, method: Method, y: &[f64], h: f64, scratch: &mut Scratch) -> Vec<f64> {
    let n = y.len();
    match method {
        Method::Euler => {
            sys.rhs(y, &mut scratch.k1);
            (0..n).map(|i| y[i] + h * scratch.k1[i]).collect()
        }
        Method::Rk4 => {
            let Scratch { k1, k2, k3, k4, tmp } = scratch;
            sys.rhs(y, k1);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            sys.rhs(tmp, k2);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            sys.rhs(tmp, k3);
            for i in 0..n {
                tmp[i] = y[i] + h * k3[i];
            }
            sys.rhs(tmp, k4);
            (0..n).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
        }
    }
}

struct Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Integrates `sys` from `y0`, calling `record(t, y, loss)` at the start,
/// every `record_every` accepted steps, and at the end.
///
/// In adaptive mode each step is taken twice, once whole and once as two
/// halves; the difference estimates the local error relative to the largest
/// state component. Steps that exceed the tolerance, or that raise the loss,
/// are retried with a smaller step.
pub(crate) fn drive<S: OdeSystem>(
    sys: &S,
    y0: Vec<f64>,
    cfg: &DriverSettings,
    mut record: impl FnMut(f64, &[f64], f64),
) -> Result<DriverResult> {
    let n = y0.len();
    let mut scratch =
        Scratch { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] };
    let mut y = y0;
    let mut t = 0.0;
    let mut loss = sys.loss(&y);
    let mut h = cfg.step;
    let mut steps = 0usize;
    let mut rejections = 0usize;
    let exponent = 1.0 / f64::from(cfg.method.order() + 1);
    record(t, &y, loss);
    let outcome = loop {
        if loss <= cfg.stop_loss {
            break Outcome::Converged;
        }
        if t >= cfg.t_max {
            break Outcome::NotConverged;
        }
        if h < MIN_STEP || rejections > cfg.max_rejections {
            return Err(Error::StepCollapse { t, min_step: MIN_STEP });
        }
        let h_try = h.min(cfg.t_max - t);
        let (candidate, err) = if cfg.adaptive {
            let whole = step_once(sys, cfg.method, &y, h_try, &mut scratch);
            let mid = step_once(sys, cfg.method, &y, 0.5 * h_try, &mut scratch);
            let halves = step_once(sys, cfg.method, &mid, 0.5 * h_try, &mut scratch);
            let scale = max_abs(&halves).max(f64::MIN_POSITIVE);
            let diff = whole.iter().zip(&halves).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            (halves, diff / (cfg.tolerance * scale))
        } else {
            (step_once(sys, cfg.method, &y, h_try, &mut scratch), 0.0)
        };
        if candidate.iter().any(|v| !v.is_finite()) {
            if cfg.adaptive {
                h = 0.5 * h_try;
                rejections += 1;
                continue;
            }
            return Err(Error::Numerical(format!("state became non-finite at t = {t}")));
        }
        if cfg.adaptive && err > 1.0 {
            h = h_try * (0.9 * err.powf(-exponent)).clamp(0.1, 0.5);
            rejections += 1;
            continue;
        }
        let new_loss = sys.loss(&candidate);
        if cfg.adaptive && new_loss > loss + LOSS_SLACK.max(1e-12 * loss) {
            h = 0.5 * h_try;
            rejections += 1;
            continue;
        }
        rejections = 0;
        y = candidate;
        loss = new_loss;
        t += h_try;
        steps += 1;
        if cfg.adaptive {
            let grow = if err > 0.0 { (0.9 * err.powf(-exponent)).min(5.0) } else { 5.0 };
            h = h_try * grow.max(1.0);
        }
        if cfg.record_every > 0 && steps.is_multiple_of(cfg.record_every) {
            record(t, &y, loss);
        }
    };
    if cfg.record_every == 0 || !steps.is_multiple_of(cfg.record_every) {
        record(t, &y, loss);
    }
    Ok(DriverResult { y, outcome, steps })
}
