//! Limit spectra of the end-to-end matrix for block observations under the
//! `alpha`/`m` initialization.
//!
//! The limit has `sigma1` once, a secondary value `sigma_secondary` with
//! multiplicity `n - 1` and zeros elsewhere. At depth two both values have a
//! closed form. At larger depth each solves a monotone scalar equation
//! `f(sigma) = C`, solved here by bisection on `log sigma` with every
//! comparison carried out on logarithms so that `C` may be astronomically
//! large.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::Sharpness;
use crate::observation::BlockSpec;

/// Which formula produced a [`LimitSpectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    ClosedFormDepthTwo,
    Implicit,
    /// `m = inf`: every block converges on its own.
    DecoupledInfinity,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::ClosedFormDepthTwo => "closed_form",
            Branch::Implicit => "implicit",
            Branch::DecoupledInfinity => "decoupled_infinity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSpectrum {
    pub sigma1: f64,
    pub sigma_secondary: f64,
    /// `n`, the number of blocks; `sigma_secondary` repeats `n - 1` times.
    pub blocks: usize,
    pub dim: usize,
    pub branch: Branch,
}

impl LimitSpectrum {
    /// All `dim` singular values. The first is `sigma1` even when it is not
    /// the largest.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        s[0] = self.sigma1;
        for v in s.iter_mut().take(self.blocks).skip(1) {
            *v = self.sigma_secondary;
        }
        s
    }

    /// `1 + (n - 1) (sigma_secondary / sigma1)^2`.
    pub fn stable_rank(&self) -> f64 {
        let top = self.sigma1.max(self.sigma_secondary);
        let (a, b) = (self.sigma1 / top, self.sigma_secondary / top);
        a * a + (self.blocks as f64 - 1.0) * b * b
    }
}

/// A real number stored as sign and log-magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogScalar {
    /// `-1`, `0` or `1`.
    pub sign: f64,
    /// `ln |value|`; `-inf` for zero.
    pub ln_abs: f64,
}

impl LogScalar {
    pub fn from_value(v: f64) -> Self {
        if v == 0.0 {
            Self { sign: 0.0, ln_abs: f64::NEG_INFINITY }
        } else {
            Self { sign: v.signum(), ln_abs: v.abs().ln() }
        }
    }

    /// Plain `f64`, possibly `+-inf` or `0` when out of range.
    pub fn value(self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }
}

/// The right-hand side
/// `C = (alpha/m)^(2-L) ((m + d - 1)^(2-L) - (m - 1)^(2-L))`, negative for
/// every valid input with `L >= 3`.
pub fn constant_c(alpha: f64, m: f64, depth: usize, dim: usize) -> Result<LogScalar> {
    if depth < 3 {
        return Err(Error::InvalidParameter("the implicit constant needs depth at least 3".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) || !(m > 1.0 && m.is_finite()) || dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "need alpha > 0, m > 1 and d >= 2, got alpha = {alpha}, m = {m}, d = {dim}"
        )));
    }
    let e = 2.0 - depth as f64;
    let d = dim as f64;
    // (m+d-1)^e - (m-1)^e = -(m-1)^e (1 - r^(L-2)) with r = (m-1)/(m+d-1).
    let ln_r = (-d / (m + d - 1.0)).ln_1p();
    let gap = -((depth as f64 - 2.0) * ln_r).exp_m1();
    let ln_abs = e * (alpha.ln() - m.ln()) + e * (m - 1.0).ln() + gap.ln();
    Ok(LogScalar { sign: -1.0, ln_abs })
}

/// `ln(e^x + e^y)` without overflow.
fn log_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    if hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Sign of `e^lp - e^lq - c`.
fn sign_of_difference(lp: f64, lq: f64, c: LogScalar) -> f64 {
    let (left, right) = match c.sign {
        s if s < 0.0 => (log_add_exp(lp, c.ln_abs), lq),
        s if s > 0.0 => (lp, log_add_exp(lq, c.ln_abs)),
        _ => (lp, lq),
    };
    if left > right {
        1.0
    } else if left < right {
        -1.0
    } else {
        0.0
    }
}

/// `ln(1 - x)`, saturating to `-inf` once rounding pushes `x` past 1.
fn ln_one_minus(x: f64) -> f64 {
    if x >= 1.0 {
        f64::NEG_INFINITY
    } else {
        (-x).ln_1p()
    }
}

/// Scalar problem shared by both equations.
#[derive(Debug, Clone, Copy)]
struct Problem {
    /// `(2 - L) / L`, negative.
    a: f64,
    /// `w* d`.
    total: f64,
    /// `n - 1`.
    others: f64,
    c: LogScalar,
}

impl Problem {
    /// `sign(f2(e^u) - C)` with `f2(s) = (total - others s)^a - s^a`, an
    /// increasing function on `(0, total / others)`.
    fn secondary_sign(&self, u: f64) -> f64 {
        let ln_rest = self.total.ln() + ln_one_minus(self.others * u.exp() / self.total);
        sign_of_difference(self.a * ln_rest, self.a * u, self.c)
    }

    /// `sign(f1(e^u) - C)` with `f1(s) = s^a - ((total - s) / others)^a`, a
    /// decreasing function on `(0, total)`.
    fn top_sign(&self, u: f64) -> f64 {
        let ln_rest = self.total.ln() + ln_one_minus(u.exp() / self.total) - self.others.ln();
        sign_of_difference(self.a * u, self.a * ln_rest, self.c)
    }
}

const GRID_POINTS: usize = 100;
const MAX_BISECTIONS: usize = 200;

/// Finds the sign change of `sign_at` on `(-inf, hi)` where the sign is
/// `low_sign` far to the left and `-low_sign` near `hi`.
fn bisect_log(sign_at: impl Fn(f64) -> f64, hi: f64, low_sign: f64, tolerance: f64) -> Result<f64> {
    // Walk left until the far-left sign appears.
    let mut width = 1.0;
    let mut lo = hi - width;
    while sign_at(lo) != low_sign {
        width *= 2.0;
        lo = hi - width;
        if width > 1e6 {
            return Err(Error::BracketFailure(format!("no sign change left of log sigma = {hi}")));
        }
    }
    // The sign sequence over the bracket must switch exactly once.
    let mut switches = 0;
    let mut prev = low_sign;
    for k in 1..=GRID_POINTS {
        let u = lo + (hi - lo) * k as f64 / (GRID_POINTS + 1) as f64;
        let s = sign_at(u);
        if s != 0.0 && s != prev {
            switches += 1;
            prev = s;
        }
    }
    if switches > 1 {
        return Err(Error::BracketFailure(format!("sign pattern on [{lo}, {hi}] changes {switches} times")));
    }
    let mut hi = hi;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tolerance {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let s = sign_at(mid);
        if s == 0.0 {
            return Ok(mid);
        }
        if s == low_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo > tolerance {
        return Err(Error::BracketFailure(format!(
            "bisection stopped with bracket width {} after {MAX_BISECTIONS} steps",
            hi - lo
        )));
    }
    Ok(0.5 * (lo + hi))
}

/// Solves both implicit equations for a depth `L >= 3` block problem.
///
/// `tolerance` bounds the relative error of each root; it is the final width
/// of the bracket on `log sigma`.
pub fn solve_implicit(
    depth: usize,
    dim: usize,
    blocks: usize,
    target: f64,
    c: LogScalar,
    tolerance: f64,
) -> Result<(f64, f64)> {
    if depth < 3 {
        return Err(Error::InvalidParameter("the implicit equations need depth at least 3".into()));
    }
    if blocks < 2 {
        return Err(Error::Degenerate("a single block has no secondary singular value".into()));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let p =
        Problem { a: (2.0 - depth as f64) / depth as f64, total: target * dim as f64, others: blocks as f64 - 1.0, c };
    let u_secondary = bisect_log(|u| p.secondary_sign(u), (p.total / p.others).ln(), -1.0, tolerance)?;
    let u_top = bisect_log(|u| p.top_sign(u), p.total.ln(), 1.0, tolerance)?;
    let sigma_secondary = u_secondary.exp();
    let mismatch = (u_top.exp() + p.others * sigma_secondary - p.total).abs();
    if mismatch > 1e-8 * p.total {
        return Err(Error::BracketFailure(format!("roots violate sigma1 + (n-1) sigma = w* d by {mismatch:e}")));
    }
    // The top equation is flat near w* d, so its root is only located to the
    // bracket width; the linear constraint pins it far more precisely.
    Ok((p.total - p.others * sigma_secondary, sigma_secondary))
}

/// Depth-two closed form, written in terms of `1/m` so that huge `m` stays
/// finite.
pub fn closed_form_depth_two(m: f64, dim: usize, blocks: usize, target: f64) -> (f64, f64) {
    let d = dim as f64;
    let inv = 1.0 / m;
    let p = 1.0 + (d - 1.0) * inv;
    let q = 1.0 - inv;
    let den = p * p + (blocks as f64 - 1.0) * q * q;
    (target * d * p * p / den, target * d * q * q / den)
}

/// Default relative tolerance of [`predict_limit`].
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Limit spectrum of gradient flow on the block observations of `spec`,
/// starting from the `alpha`/`m` initialization at depth `depth`.
pub fn predict_limit(spec: &BlockSpec, alpha: f64, m: Sharpness, depth: usize) -> Result<LimitSpectrum> {
    spec.validate()?;
    m.validate()?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if depth < 2 {
        return Err(Error::InvalidParameter("limit predictions need depth at least 2".into()));
    }
    if spec.blocks < 2 {
        return Err(Error::Degenerate("a single block has no secondary singular value".into()));
    }
    let (dim, n, w) = (spec.dim(), spec.blocks, spec.target);
    let (sigma1, sigma_secondary, branch) = match (m, depth) {
        (Sharpness::Infinite, _) => {
            let v = spec.block_size as f64 * w;
            (v, v, Branch::DecoupledInfinity)
        }
        (Sharpness::Finite(mv), 2) => {
            let (a, b) = closed_form_depth_two(mv, dim, n, w);
            (a, b, Branch::ClosedFormDepthTwo)
        }
        (Sharpness::Finite(mv), _) => {
            let c = constant_c(alpha, mv, depth, dim)?;
            let (a, b) = solve_implicit(depth, dim, n, w, c, DEFAULT_TOLERANCE)?;
            (a, b, Branch::Implicit)
        }
    };
    Ok(LimitSpectrum { sigma1, sigma_secondary, blocks: n, dim, branch })
}
