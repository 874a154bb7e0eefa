//! The five mixture families as differentiable log-likelihoods over a flat
//! unconstrained parameter vector.

mod density;
mod init;
mod layout;
mod spec;

use std::sync::atomic::{AtomicUsize, Ordering};

pub use density::{mean_loglik, weighted_log_densities, DIAG_FLOOR};
pub use init::{init_params, initial_means, kmeans, InitStrategy, INITIAL_DOF};
pub use layout::{Layout, ParamSet, Segment, SegmentKind};
pub use spec::{Family, ModelSpec};

use crate::autodiff::{Eval, Tape};
use crate::data::{Assignment, Dataset};
use crate::mixture::{log_sum_exp, MixtureParams};
use crate::optim::{maximize, FitResult, Objective, OptConfig};
use crate::Result;

impl ParamSet {
    /// Weights, means, covariances (and degrees of freedom) in constrained
    /// space.
    pub fn constrained(&self) -> Result<MixtureParams> {
        density::constrained(&self.spec, &self.theta)
    }
}

/// Mean log-likelihood of `params` on `data`.
pub fn loglik(params: &ParamSet, data: &Dataset) -> Result<f64> {
    mean_loglik(&mut Eval::new(), &params.spec, &params.theta, data)
}

/// Posterior membership probabilities, computed in log space.
pub fn responsibilities(params: &ParamSet, data: &Dataset) -> Result<Assignment> {
    let lw = weighted_log_densities(&mut Eval::new(), &params.spec, &params.theta, data)?;
    Ok(Assignment::from_log_weights(&lw, params.spec.k))
}

/// Total log-likelihood `Σᵢ log f(xᵢ)`.
pub fn total_loglik(params: &ParamSet, data: &Dataset) -> Result<f64> {
    let lw = weighted_log_densities(&mut Eval::new(), &params.spec, &params.theta, data)?;
    Ok(lw.chunks_exact(params.spec.k).map(log_sum_exp).sum())
}

/// Mean log-likelihood as an [`Objective`] over the flat vector.
pub struct MixtureObjective<'a> {
    spec: ModelSpec,
    data: &'a Dataset,
    tape_hint: AtomicUsize,
}

impl<'a> MixtureObjective<'a> {
    pub fn new(spec: ModelSpec, data: &'a Dataset) -> MixtureObjective<'a> {
        MixtureObjective {
            spec,
            data,
            tape_hint: AtomicUsize::new(0),
        }
    }
}

impl Objective for MixtureObjective<'_> {
    fn dim(&self) -> usize {
        Layout::new(&self.spec).len
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        mean_loglik(&mut Eval::new(), &self.spec, theta, self.data)
    }

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut tape = Tape::with_capacity(self.tape_hint.load(Ordering::Relaxed));
        let vars = tape.vars(theta)?;
        let out = mean_loglik(&mut tape, &self.spec, &vars, self.data)?;
        self.tape_hint.store(tape.len(), Ordering::Relaxed);
        let r = tape.backward(out, &vars)?;
        Ok((r.value, r.grads))
    }
}

/// Maximizes the mean log-likelihood from `init`.
pub fn fit_model(data: &Dataset, init: &ParamSet, cfg: &OptConfig) -> Result<FitResult<ParamSet>> {
    let obj = MixtureObjective::new(init.spec, data);
    let spec = init.spec;
    let r = maximize(&obj, init.theta.clone(), cfg)?;
    Ok(r.map(|theta| ParamSet { spec, theta }))
}
