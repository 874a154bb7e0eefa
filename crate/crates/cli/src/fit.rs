use std::path::Path;

use mixgrad::em::{em_fit_gmm, initial_mixture, EmConfig};
use mixgrad::metrics::{ari, EvalReport};
use mixgrad::models::{
    fit_model, initial_means, responsibilities, total_loglik, Family, InitStrategy, ModelSpec,
    ParamSet,
};
use mixgrad::optim::{Method, OptConfig};
use mixgrad::{Assignment, MixtureParams};
use serde::{Deserialize, Serialize};

use crate::args::FitArgs;
use crate::error::{CliError, CliResult};
use crate::io::{self, LabelCol};
use crate::manifest::{Invocation, Manifest};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "snake_case")]
pub enum Fitter {
    Gradient(OptConfig),
    Em(EmConfig),
}

/// Everything `fit` writes. No wall-clock fields, so reruns are byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDocument {
    pub model: ModelSpec,
    pub fitter: Fitter,
    pub params: MixtureParams,
    /// Unconstrained vector; absent for EM.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// Mean log-likelihood per iteration, starting at the initial value.
    pub trajectory: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub diverged: bool,
    pub metrics: EvalReport,
    pub labels: Vec<usize>,
    pub responsibilities: Vec<Vec<f64>>,
    pub manifest: Manifest,
}

struct Outcome {
    params: MixtureParams,
    theta: Option<Vec<f64>>,
    trajectory: Vec<f64>,
    iters: usize,
    converged: bool,
    diverged: bool,
    loglik: f64,
    assignment: Assignment,
}

pub fn run(args: &FitArgs, out: &Path) -> CliResult<()> {
    let label_col = args.label_col.as_deref().map(LabelCol::parse).transpose()?;
    let loaded = io::read_data(&args.data, args.header, label_col)?;
    let data = &loaded.data;
    let family = Family::parse(&args.model, args.constraint.as_deref())?;
    let spec = ModelSpec::new(family, args.k, data.p(), args.q)?;
    let strategy: InitStrategy = args.init.parse()?;
    log::info!(
        "fitting {family} with K={} to n={} p={}",
        args.k,
        data.n(),
        data.p()
    );

    let means = initial_means(data, spec.k, strategy, args.seed)?;
    let (fitter, outcome) = if args.method.eq_ignore_ascii_case("em") {
        if spec.family != Family::Gmm {
            return Err(CliError::Usage(format!(
                "em is only available for gmm, not {family}"
            )));
        }
        let cfg = EmConfig {
            max_iter: args.max_iter,
            tol: args.tol,
            ridge: args.ridge,
            seed: args.seed,
        };
        let fit = em_fit_gmm(data, initial_mixture(&means), &cfg)?;
        let assignment = fit.params.responsibilities(data)?;
        let outcome = Outcome {
            loglik: fit.params.total_loglik(data)?,
            params: fit.params,
            theta: None,
            trajectory: fit.trajectory,
            iters: fit.iters,
            converged: fit.converged,
            diverged: fit.diverged,
            assignment,
        };
        (Fitter::Em(cfg), outcome)
    } else {
        let method: Method = args.method.parse()?;
        let mut cfg = OptConfig::new(method);
        cfg.lr = args.lr.unwrap_or(cfg.lr);
        cfg.max_iter = args.max_iter;
        cfg.tol = args.tol;
        cfg.seed = args.seed;
        let init = ParamSet::from_means(spec, &means)?;
        let fit = fit_model(data, &init, &cfg)?;
        let outcome = Outcome {
            params: fit.params.constrained()?,
            loglik: total_loglik(&fit.params, data)?,
            assignment: responsibilities(&fit.params, data)?,
            theta: Some(fit.params.theta),
            trajectory: fit.trajectory,
            iters: fit.iters,
            converged: fit.converged,
            diverged: fit.diverged,
        };
        (Fitter::Gradient(cfg), outcome)
    };

    let ari = data
        .labels()
        .map(|truth| ari(&outcome.assignment.labels, truth))
        .transpose()?;
    let doc = FitDocument {
        model: spec,
        fitter,
        params: outcome.params,
        theta: outcome.theta,
        trajectory: outcome.trajectory,
        iters: outcome.iters,
        converged: outcome.converged,
        diverged: outcome.diverged,
        metrics: EvalReport::new(outcome.loglik, spec.param_count(), data.n(), ari),
        labels: outcome.assignment.labels.clone(),
        responsibilities: (0..data.n())
            .map(|i| outcome.assignment.row(i).to_vec())
            .collect(),
        manifest: Manifest::new(Invocation::Fit(args.clone()), Some(loaded.sha256)),
    };
    io::write(out, io::to_json(&doc))?;
    log::info!(
        "log-likelihood {:.6} after {} iterations (converged: {})",
        doc.metrics.total_loglik,
        doc.iters,
        doc.converged
    );
    if doc.diverged {
        return Err(CliError::Numeric(format!(
            "fit diverged after {} iterations; last finite parameters written to {}",
            doc.iters,
            out.display()
        )));
    }
    Ok(())
}
