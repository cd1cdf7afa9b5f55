//! Deep matrix factorization for matrix completion.
//!
//! A matrix is modelled as a product `W_L * ... * W_1` of square factors and
//! fitted to a subset of its entries by gradient flow or gradient descent.
//! The crate provides the model itself, the connectivity and coupling
//! analysis of observation patterns, integrators, closed-form and implicit
//! predictions of the limits they reach, and spectral metrics.
//!
//! ```
//! use deepfact_core::{build_init, build_observation_block, predict_limit, BlockSpec, InitScheme, Sharpness};
//!
//! let spec = BlockSpec::new(1, 3, 1.0).unwrap();
//! let obs = build_observation_block(&spec).unwrap();
//! let chain = build_init(&InitScheme::AlphaM { alpha: 0.1, m: Sharpness::Finite(2.0) }, 2, 3).unwrap();
//! assert_eq!(chain.dim(), obs.dim());
//! let limit = predict_limit(&spec, 0.1, Sharpness::Finite(2.0), 2).unwrap();
//! assert!((limit.sigma1 - 8.0 / 3.0).abs() < 1e-12);
//! ```

mod chain;
mod error;
mod init;
mod observation;

pub mod flow;
pub mod graph;
pub mod metrics;
pub mod theory;

pub use chain::{layer_gradients, loss, FactorChain};
pub use error::{Error, Result};
pub use init::{build_init, InitScheme, Sharpness};
pub use observation::{build_observation_block, BlockSpec, Observation, ObservationSet};

pub use flow::{
    integrate_gradient_flow, integrate_reduced_eigen, run_gradient_descent, EigenState, GdConfig, IntegratorConfig,
    Method, Outcome, Trajectory,
};
pub use graph::{check_connectivity, detect_decoupling, gradient_inner_product, CouplingReport, CouplingVerdict};
pub use metrics::{effective_rank, reconstruction_error, spectrum, stable_rank, ErrorScope};
pub use theory::{predict_limit, LimitSpectrum};

/// Dense real matrix used throughout the crate.
pub use nalgebra::DMatrix;
