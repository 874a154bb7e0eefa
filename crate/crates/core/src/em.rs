//! Expectation-maximization for full-covariance Gaussian mixtures.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Assignment, Dataset};
use crate::mixture::{log_sum_exp, MixtureParams};
use crate::optim::FitResult;
use crate::{Error, Result};

/// Responsibility mass below which a component counts as empty.
const EMPTY_MASS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// Added to every covariance diagonal in the M-step.
    pub ridge: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iter: 1000,
            tol: 1e-6,
            ridge: 1e-6,
            seed: 0,
        }
    }
}

/// Uniform weights, the given means and identity covariances.
pub fn initial_mixture(means: &[Vec<f64>]) -> MixtureParams {
    let k = means.len();
    let p = means.first().map_or(0, Vec::len);
    let eye = DMatrix::<f64>::identity(p, p);
    MixtureParams {
        weights: vec![1.0 / k as f64; k],
        means: means.to_vec(),
        covs: vec![eye.transpose().as_slice().to_vec(); k],
        dofs: None,
    }
}

/// Responsibilities and the mean log-likelihood of the current parameters.
pub fn e_step(model: &MixtureParams, data: &Dataset) -> Result<(Assignment, f64)> {
    let lw = model.weighted_log_densities(data)?;
    let k = model.k();
    let total: f64 = lw.chunks_exact(k).map(log_sum_exp).sum();
    Ok((
        Assignment::from_log_weights(&lw, k),
        total / data.n() as f64,
    ))
}

/// Responsibility-weighted scatter of component `c` about its weighted mean.
pub fn weighted_scatter(
    data: &Dataset,
    gamma: &Assignment,
    c: usize,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let p = data.p();
    let mut mass = 0.0;
    let mut mean = DVector::zeros(p);
    for (i, x) in data.rows().enumerate() {
        let w = gamma.row(i)[c];
        mass += w;
        mean.axpy(w, &DVector::from_column_slice(x), 1.0);
    }
    if mass > 0.0 {
        mean /= mass;
    }
    let mut scatter = DMatrix::zeros(p, p);
    for (i, x) in data.rows().enumerate() {
        let w = gamma.row(i)[c];
        let d = DVector::from_column_slice(x) - &mean;
        scatter.ger(w, &d, &d, 1.0);
    }
    if mass > 0.0 {
        scatter /= mass;
    }
    (mass, mean, scatter)
}

/// Closed-form parameter update. The returned mask flags components with
/// (numerically) no mass so the caller can re-seed them.
pub fn m_step(data: &Dataset, gamma: &Assignment, ridge: f64) -> (MixtureParams, Vec<bool>) {
    let (n, p, k) = (data.n() as f64, data.p(), gamma.k);
    let mut out = MixtureParams {
        weights: Vec::with_capacity(k),
        means: Vec::with_capacity(k),
        covs: Vec::with_capacity(k),
        dofs: None,
    };
    let mut empty = vec![false; k];
    for c in 0..k {
        let (mass, mean, mut scatter) = weighted_scatter(data, gamma, c);
        empty[c] = mass < EMPTY_MASS;
        for i in 0..p {
            scatter[(i, i)] += ridge;
        }
        out.weights.push(mass / n);
        out.means.push(mean.as_slice().to_vec());
        out.covs.push(scatter.transpose().as_slice().to_vec());
    }
    (out, empty)
}

/// Moves each empty component onto the point the current mixture explains
/// worst, with identity covariance and weight `1/n`.
fn reseed(
    model: &mut MixtureParams,
    empty: &[bool],
    data: &Dataset,
    previous: &MixtureParams,
) -> Result<()> {
    let lw = previous.weighted_log_densities(data)?;
    let dens: Vec<f64> = lw.chunks_exact(previous.k()).map(log_sum_exp).collect();
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.sort_by(|&a, &b| dens[a].total_cmp(&dens[b]));
    let p = data.p();
    for (slot, c) in empty
        .iter()
        .enumerate()
        .filter(|(_, e)| **e)
        .map(|(c, _)| c)
        .enumerate()
    {
        let i = order[slot.min(order.len() - 1)];
        log::info!("em: component {c} emptied; re-seeding at point {i}");
        model.means[c] = data.row(i).to_vec();
        model.covs[c] = DMatrix::<f64>::identity(p, p).as_slice().to_vec();
        model.weights[c] = 1.0 / data.n() as f64;
    }
    let total: f64 = model.weights.iter().sum();
    for w in &mut model.weights {
        *w /= total;
    }
    Ok(())
}

/// Runs EM from `init` until the mean log-likelihood changes by less than
/// `tol` or `max_iter` M-steps have been taken.
pub fn em_fit_gmm(
    data: &Dataset,
    init: MixtureParams,
    cfg: &EmConfig,
) -> Result<FitResult<MixtureParams>> {
    init.validate()?;
    if init.k() > data.n() {
        return Err(Error::InvalidInput(format!(
            "need K <= n (got K={}, n={})",
            init.k(),
            data.n()
        )));
    }
    if !(cfg.ridge >= 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::Config("ridge must be >= 0 and tol > 0".into()));
    }
    let start = Instant::now();
    let mut model = init;
    let (mut gamma, mut value) = e_step(&model, data)?;
    let mut trajectory = vec![value];
    let mut converged = false;
    let mut diverged = false;
    for _ in 0..cfg.max_iter {
        let (mut next, empty) = m_step(data, &gamma, cfg.ridge);
        if empty.iter().any(|&e| e) {
            reseed(&mut next, &empty, data, &model)?;
        }
        match e_step(&next, data) {
            Ok((g, v)) if v.is_finite() => {
                let delta = (v - value).abs();
                model = next;
                gamma = g;
                value = v;
                trajectory.push(v);
                if delta < cfg.tol {
                    converged = true;
                    break;
                }
            }
            other => {
                if let Err(e) = other {
                    log::warn!("em: {e}");
                }
                diverged = true;
                break;
            }
        }
    }
    Ok(FitResult {
        params: model,
        iters: trajectory.len() - 1,
        trajectory,
        converged,
        diverged,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_component_is_closed_form() {
        let rows = vec![
            vec![1.0, 2.0],
            vec![3.0, 0.0],
            vec![-1.0, 1.0],
            vec![5.0, 5.0],
        ];
        let d = Dataset::from_rows(&rows).unwrap();
        let cfg = EmConfig {
            max_iter: 1,
            ..EmConfig::default()
        };
        let r = em_fit_gmm(&d, initial_mixture(&[vec![0.0, 0.0]]), &cfg).unwrap();
        let m = &r.params;
        assert_eq!(m.means[0], vec![2.0, 2.0]);
        // population covariance: [[5, 2.5], [2.5, 3.5]]
        let want = [5.0 + 1e-6, 2.5, 2.5, 3.5 + 1e-6];
        for (a, b) in m.covs[0].iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(m.weights, vec![1.0]);
    }

    #[test]
    fn unridged_scatter_is_rank_deficient_when_n_le_p() {
        let d = Dataset::new(
            5,
            8,
            (0..40).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect(),
        )
        .unwrap();
        let gamma = Assignment::from_log_weights(&[0.0; 5], 1);
        let (m, _) = m_step(&d, &gamma, 0.0);
        assert!(m.min_cov_eigenvalue() < 1e-10);
        let (m, _) = m_step(&d, &gamma, 1e-6);
        assert!(m.min_cov_eigenvalue() > 0.0);
    }

    #[test]
    fn empty_component_is_reseeded() {
        let d = Dataset::new(4, 1, vec![0.0, 0.1, -0.1, 9.0]).unwrap();
        let init = initial_mixture(&[vec![0.0], vec![1e6]]);
        let r = em_fit_gmm(&d, init, &EmConfig::default()).unwrap();
        assert!(!r.diverged);
        assert!(r.params.weights.iter().all(|w| *w > 0.1));
    }
}
