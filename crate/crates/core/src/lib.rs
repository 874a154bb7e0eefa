//! Model-based clustering with mixture models fitted by gradient ascent on
//! the log-likelihood.
//!
//! Gradients come from a scalar reverse-mode AD tape ([`autodiff`]); the
//! mixture constraints (simplex weights, positive-definite covariances,
//! orthogonal orientations, positive degrees of freedom) are handled by
//! smooth reparametrizations ([`reparam`]), so every optimizer in [`optim`]
//! works on an unconstrained flat vector. [`em`] provides the classical EM
//! baseline for full-covariance Gaussian mixtures.
//!
//! A typical session: pick a [`models::ModelSpec`], initialize a
//! [`models::ParamSet`] with [`models::init_params`], run
//! [`models::fit_model`], then export with [`models::ParamSet::constrained`]
//! and [`models::responsibilities`].

pub mod autodiff;
mod data;
pub mod em;
mod error;
pub mod metrics;
pub mod mixture;
pub mod models;
pub mod optim;
pub mod reparam;
pub mod rng;
pub mod simulate;

pub use data::{Assignment, Dataset};
pub use error::{Error, Result};
pub use mixture::MixtureParams;
