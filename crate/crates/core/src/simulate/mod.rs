//! Seeded synthetic mixtures and the optimizer benchmark sweep.

mod sweep;

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

pub use sweep::{
    benchmark_sweep, quartiles, summarize, BenchMethod, BenchRecord, SummaryRow, SweepConfig,
};

use crate::data::Dataset;
use crate::mixture::MixtureParams;
use crate::rng::{stream, tag};
use crate::{Error, Result};

const DIRICHLET_ALPHA: f64 = 0.3;
const MIN_MASS: f64 = 0.05;

/// Covariance structure of the generating components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CovMode {
    /// `Σₖ = Gₖ Gₖᵀ`, `Gₖ` standard normal scaled by `1/√p`.
    Full,
    /// One diagonal covariance shared by all components.
    Eei,
    /// A diagonal covariance per component.
    Vvi,
}

impl fmt::Display for CovMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovMode::Full => "FULL",
            CovMode::Eei => "EEI",
            CovMode::Vvi => "VVI",
        })
    }
}

impl FromStr for CovMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FULL" => Ok(CovMode::Full),
            "EEI" => Ok(CovMode::Eei),
            "VVI" => Ok(CovMode::Vvi),
            _ => Err(Error::Config(format!(
                "unknown covariance mode {s:?} (expected full, eei or vvi)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub scale: f64,
    pub seed: u64,
    pub covariance_mode: CovMode,
    pub imbalance: bool,
    pub noise_features: usize,
}

impl SimSpec {
    /// Balanced, full-covariance, no noise features, `scale = 5`.
    pub fn new(n: usize, p: usize, k: usize, seed: u64) -> SimSpec {
        SimSpec {
            n,
            p,
            k,
            scale: 5.0,
            seed,
            covariance_mode: CovMode::Full,
            imbalance: false,
            noise_features: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n < self.k {
            return Err(Error::Config(format!(
                "need n >= K >= 1 (got n={}, K={})",
                self.n, self.k
            )));
        }
        if self.p == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config("scale must be positive".into()));
        }
        if self.imbalance && self.k as f64 * MIN_MASS > 1.0 {
            return Err(Error::Config(format!(
                "imbalanced weights need K <= {}",
                (1.0 / MIN_MASS) as usize
            )));
        }
        Ok(())
    }
}

/// A simulated dataset (labels attached) and the parameters that generated
/// it. Noise features appear in `truth` with mean 0 and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulated {
    pub data: Dataset,
    pub truth: MixtureParams,
}

fn draw_weights<R: Rng>(spec: &SimSpec, rng: &mut R) -> Result<Vec<f64>> {
    let k = spec.k;
    if !spec.imbalance || k == 1 {
        return Ok(vec![1.0 / k as f64; k]);
    }
    // symmetric Dirichlet as normalized Gamma draws
    let gamma =
        Gamma::new(DIRICHLET_ALPHA, 1.0).map_err(|e| Error::Config(format!("gamma: {e}")))?;
    loop {
        let g: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let total: f64 = g.iter().sum();
        if !(total > 0.0) {
            continue;
        }
        let w: Vec<f64> = g.iter().map(|x| x / total).collect();
        if w.iter().all(|&x| x >= MIN_MASS) {
            return Ok(w);
        }
    }
}

/// Draws `n` labelled points from a random mixture described by `spec`.
pub fn sample_mixture(spec: &SimSpec) -> Result<Simulated> {
    spec.validate()?;
    let (n, p, k) = (spec.n, spec.p, spec.k);
    let mut rng = stream(&[tag::DATA, spec.seed, n as u64, p as u64, k as u64]);
    let weights = draw_weights(spec, &mut rng)?;
    let means: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..p).map(|_| rng.random::<f64>() * spec.scale).collect())
        .collect();
    let root_p = (p as f64).sqrt();
    let gaussian = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..p * p)
            .map(|_| rng.sample::<f64, _>(StandardNormal) / root_p)
            .collect()
    };
    // Per-component matrix `F` with x = μ + F z.
    let factors: Vec<Vec<f64>> = match spec.covariance_mode {
        CovMode::Full => (0..k).map(|_| gaussian(&mut rng)).collect(),
        CovMode::Eei | CovMode::Vvi => {
            let blocks = if spec.covariance_mode == CovMode::Eei {
                1
            } else {
                k
            };
            let diags: Vec<Vec<f64>> = (0..blocks)
                .map(|_| {
                    let g = gaussian(&mut rng);
                    let mut f = vec![0.0; p * p];
                    for i in 0..p {
                        let var: f64 = g[i * p..(i + 1) * p].iter().map(|v| v * v).sum();
                        f[i * p + i] = var.sqrt();
                    }
                    f
                })
                .collect();
            (0..k).map(|c| diags[c.min(blocks - 1)].clone()).collect()
        }
    };

    let total_p = p + spec.noise_features;
    let picker = WeightedIndex::new(&weights).map_err(|e| Error::Numeric(e.to_string()))?;
    let labels: Vec<usize> = (0..n).map(|_| picker.sample(&mut rng)).collect();
    let mut x = Vec::with_capacity(n * total_p);
    let mut z = vec![0.0; p];
    for &c in &labels {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let f = &factors[c];
        for i in 0..p {
            let row = &f[i * p..(i + 1) * p];
            x.push(means[c][i] + row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>());
        }
        for _ in 0..spec.noise_features {
            x.push(rng.sample(StandardNormal));
        }
    }

    let covs = factors
        .iter()
        .map(|f| {
            let mut s = vec![0.0; total_p * total_p];
            for i in 0..p {
                for j in 0..p {
                    s[i * total_p + j] = (0..p).map(|m| f[i * p + m] * f[j * p + m]).sum();
                }
            }
            for i in p..total_p {
                s[i * total_p + i] = 1.0;
            }
            s
        })
        .collect();
    let truth = MixtureParams {
        weights,
        means: means
            .into_iter()
            .map(|mut m| {
                m.resize(total_p, 0.0);
                m
            })
            .collect(),
        covs,
        dofs: None,
    };
    let data = Dataset::new(n, total_p, x)?.with_labels(labels)?;
    Ok(Simulated { data, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_component_mean() {
        let mut s = SimSpec::new(100, 3, 1, 4);
        s.covariance_mode = CovMode::Eei;
        let sim = sample_mixture(&s).unwrap();
        assert!(sim.data.labels().unwrap().iter().all(|&l| l == 0));
        for j in 0..3 {
            let mean: f64 = sim.data.rows().map(|r| r[j]).sum::<f64>() / 100.0;
            let sd = sim.truth.covs[0][j * 3 + j].sqrt();
            assert!((mean - sim.truth.means[0][j]).abs() < 3.0 * sd / 10.0);
        }
    }

    #[test]
    fn structure_by_mode() {
        let mut s = SimSpec::new(50, 6, 3, 1);
        let full = sample_mixture(&s).unwrap();
        assert!(full.truth.min_cov_eigenvalue() >= 0.0);
        s.covariance_mode = CovMode::Eei;
        let eei = sample_mixture(&s).unwrap();
        assert_eq!(eei.truth.covs[0], eei.truth.covs[2]);
        s.covariance_mode = CovMode::Vvi;
        let vvi = sample_mixture(&s).unwrap();
        assert_ne!(vvi.truth.covs[0], vvi.truth.covs[1]);
        for c in &vvi.truth.covs {
            for i in 0..6 {
                for j in 0..6 {
                    if i != j {
                        assert_eq!(c[i * 6 + j], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn noise_features_and_reproducibility() {
        let mut s = SimSpec::new(20, 2, 2, 7);
        s.noise_features = 3;
        let a = sample_mixture(&s).unwrap();
        assert_eq!(a.data.p(), 5);
        assert_eq!(a.truth.means[0][2..], [0.0; 3]);
        assert_eq!(a, sample_mixture(&s).unwrap());
        s.seed = 8;
        assert_ne!(a.data, sample_mixture(&s).unwrap().data);
    }

    #[test]
    fn imbalanced_frequencies_follow_weights() {
        let mut s = SimSpec::new(10_000, 2, 4, 3);
        s.imbalance = true;
        let sim = sample_mixture(&s).unwrap();
        assert!(sim.truth.weights.iter().all(|&w| w >= 0.05));
        let mut counts = [0usize; 4];
        for &l in sim.data.labels().unwrap() {
            counts[l] += 1;
        }
        for (c, w) in counts.iter().zip(&sim.truth.weights) {
            assert!((*c as f64 / 10_000.0 - w).abs() < 0.02);
        }
    }

    #[test]
    fn validation() {
        assert!(sample_mixture(&SimSpec::new(2, 2, 3, 0)).is_err());
        let mut s = SimSpec::new(50, 2, 2, 0);
        s.scale = 0.0;
        assert!(sample_mixture(&s).is_err());
        assert!("diag".parse::<CovMode>().is_err());
    }
}
