use std::fmt;

use serde::{Deserialize, Serialize};

use crate::reparam::{MclustConstraint, PgmmFamily};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", content = "constraint", rename_all = "lowercase")]
pub enum Family {
    /// Full covariance Gaussian mixture.
    Gmm,
    Mclust(MclustConstraint),
    Pgmm(PgmmFamily),
    /// Mixture of factor analyzers with per-component loadings and diagonal
    /// noise.
    Mfa,
    /// Student's t mixture with full covariances.
    Tmm,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gmm => "gmm",
            Family::Mclust(_) => "mclust",
            Family::Pgmm(_) => "pgmm",
            Family::Mfa => "mfa",
            Family::Tmm => "tmm",
        }
    }

    pub fn needs_latent_dim(&self) -> bool {
        matches!(self, Family::Pgmm(_) | Family::Mfa)
    }

    /// Parses a family name and optional constraint code, e.g.
    /// `("mclust", Some("VVV"))` or `("pgmm", Some("CUU"))`.
    pub fn parse(name: &str, constraint: Option<&str>) -> Result<Family> {
        let family = match name.to_ascii_lowercase().as_str() {
            "gmm" => Family::Gmm,
            "mfa" => Family::Mfa,
            "tmm" => Family::Tmm,
            "mclust" => Family::Mclust(constraint.unwrap_or("VVV").parse()?),
            "pgmm" => Family::Pgmm(constraint.unwrap_or("UUU").parse()?),
            other => {
                return Err(Error::Config(format!(
                    "unknown model {other:?} (expected gmm, mclust, pgmm, mfa or tmm)"
                )))
            }
        };
        if constraint.is_some() && !matches!(family, Family::Mclust(_) | Family::Pgmm(_)) {
            return Err(Error::Config(format!(
                "model {name} does not take a constraint"
            )));
        }
        Ok(family)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Mclust(c) => write!(f, "mclust/{c}"),
            Family::Pgmm(c) => write!(f, "pgmm/{c}"),
            other => f.write_str(other.name()),
        }
    }
}

/// Which model to fit and at what size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub family: Family,
    pub k: usize,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
}

impl ModelSpec {
    pub fn new(family: Family, k: usize, p: usize, q: Option<usize>) -> Result<ModelSpec> {
        let spec = ModelSpec { family, k, p, q };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gmm(k: usize, p: usize) -> Result<ModelSpec> {
        ModelSpec::new(Family::Gmm, k, p, None)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config(
                "number of components must be at least 1".into(),
            ));
        }
        if self.p == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        match (self.family.needs_latent_dim(), self.q) {
            (true, None) => Err(Error::Config(format!(
                "{} requires a latent dimension q",
                self.family.name()
            ))),
            (true, Some(q)) if q == 0 || q >= self.p => Err(Error::Config(format!(
                "latent dimension q must satisfy 1 <= q < p (got q={q}, p={})",
                self.p
            ))),
            (false, Some(_)) => Err(Error::Config(format!(
                "{} does not take a latent dimension",
                self.family.name()
            ))),
            _ => Ok(()),
        }
    }

    /// Latent dimension, or 0 for families without one.
    pub fn latent(&self) -> usize {
        self.q.unwrap_or(0)
    }

    /// PGMM tying pattern (MFA behaves as `UUU`).
    pub fn pgmm_family(&self) -> Option<PgmmFamily> {
        match self.family {
            Family::Pgmm(f) => Some(f),
            Family::Mfa => Some("UUU".parse().expect("valid family")),
            _ => None,
        }
    }

    /// Number of free parameters.
    pub fn param_count(&self) -> usize {
        let (k, p, q) = (self.k, self.p, self.latent());
        let cov = match self.family {
            Family::Gmm | Family::Tmm => k * p * (p + 1) / 2,
            Family::Mclust(c) => c.cov_param_count(k, p),
            Family::Pgmm(_) | Family::Mfa => self
                .pgmm_family()
                .expect("factor family")
                .cov_param_count(k, p, q),
        };
        let dofs = if self.family == Family::Tmm { k } else { 0 };
        (k - 1) + k * p + cov + dofs
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (k={}, p={}", self.family, self.k, self.p)?;
        if let Some(q) = self.q {
            write!(f, ", q={q}")?;
        }
        f.write_str(")")
    }
}
