//! Closed-form and implicit predictions for the quantities the flow
//! produces, together with the bounds they must satisfy.

mod bounds;
mod lazy;
mod limit;
mod pretrain;

pub use bounds::{alignment_bound, alignment_ratio, plasticity_bounds_2x2, PlasticityBounds};
pub use lazy::{jacobian, lazy_loss_envelope, lazy_srank_lower_bound, JacobianReport};
pub use limit::{
    closed_form_depth_two, constant_c, predict_limit, solve_implicit, Branch, LimitSpectrum, LogScalar,
    DEFAULT_TOLERANCE,
};
pub use pretrain::pretrain_closed_form;
