//! Mixture parameters in constrained space and their plain-float densities.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::autodiff::ln_gamma;
use crate::data::{Assignment, Dataset};
use crate::{Error, Result};

/// Weights, means and covariances of a `k`-component mixture on `ℝᵖ`.
/// Components are Student's t when `dofs` is present and Gaussian otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Row-major `p × p` per component.
    pub covs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dofs: Option<Vec<f64>>,
}

impl MixtureParams {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn p(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn cov_matrix(&self, c: usize) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_row_slice(p, p, &self.covs[c])
    }

    pub fn validate(&self) -> Result<()> {
        let (k, p) = (self.k(), self.p());
        if k == 0 || p == 0 {
            return Err(Error::InvalidInput("empty mixture".into()));
        }
        if self.means.len() != k || self.covs.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: self.means.len().min(self.covs.len()),
            });
        }
        for (m, s) in self.means.iter().zip(&self.covs) {
            if m.len() != p || s.len() != p * p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: m.len(),
                });
            }
        }
        if let Some(d) = &self.dofs {
            if d.len() != k || d.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidInput(
                    "degrees of freedom must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    fn factors(&self) -> Result<Vec<(Cholesky<f64, Dyn>, f64)>> {
        (0..self.k())
            .map(|c| {
                let chol = Cholesky::new(self.cov_matrix(c)).ok_or_else(|| {
                    Error::Numeric(format!(
                        "covariance of component {c} is not positive definite"
                    ))
                })?;
                let logdet = 2.0
                    * chol
                        .l_dirty()
                        .diagonal()
                        .iter()
                        .map(|d| d.ln())
                        .sum::<f64>();
                Ok((chol, logdet))
            })
            .collect()
    }

    /// `log πₖ + log fₖ(xᵢ)` as an `n × k` row-major matrix.
    pub fn weighted_log_densities(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.validate()?;
        let (k, p) = (self.k(), self.p());
        if data.p() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: data.p(),
            });
        }
        let factors = self.factors()?;
        let log_w: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        let pf = p as f64;
        let mut out = Vec::with_capacity(data.n() * k);
        for x in data.rows() {
            for c in 0..k {
                let diff =
                    DVector::from_iterator(p, x.iter().zip(&self.means[c]).map(|(a, b)| a - b));
                let z = factors[c]
                    .0
                    .l_dirty()
                    .solve_lower_triangular(&diff)
                    .ok_or_else(|| Error::Numeric(format!("singular factor in component {c}")))?;
                let delta = z.norm_squared();
                let logdet = factors[c].1;
                let lf = match &self.dofs {
                    None => -0.5 * (pf * (2.0 * PI).ln() + logdet + delta),
                    Some(d) => {
                        let nu = d[c];
                        ln_gamma((nu + pf) / 2.0)
                            - ln_gamma(nu / 2.0)
                            - 0.5 * pf * (nu * PI).ln()
                            - 0.5 * logdet
                            - 0.5 * (nu + pf) * (delta / nu).ln_1p()
                    }
                };
                out.push(log_w[c] + lf);
            }
        }
        Ok(out)
    }

    /// Total (not mean) log-likelihood.
    pub fn total_loglik(&self, data: &Dataset) -> Result<f64> {
        let lw = self.weighted_log_densities(data)?;
        Ok(lw.chunks_exact(self.k()).map(log_sum_exp).sum())
    }

    pub fn responsibilities(&self, data: &Dataset) -> Result<Assignment> {
        let lw = self.weighted_log_densities(data)?;
        Ok(Assignment::from_log_weights(&lw, self.k()))
    }

    /// Smallest covariance eigenvalue over all components.
    pub fn min_cov_eigenvalue(&self) -> f64 {
        (0..self.k())
            .map(|c| self.cov_matrix(c).symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
