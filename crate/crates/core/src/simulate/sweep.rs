use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_mixture, SimSpec};
use crate::em::{em_fit_gmm, initial_mixture, EmConfig};
use crate::metrics::ari;
use crate::models::{
    fit_model, initial_means, responsibilities, total_loglik, InitStrategy, ModelSpec, ParamSet,
};
use crate::optim::{Method, OptConfig};
use crate::rng::stream_key;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    Gd,
    Adam,
    NewtonCg,
    Em,
}

impl BenchMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchMethod::Gd => "gd",
            BenchMethod::Adam => "adam",
            BenchMethod::NewtonCg => "newton_cg",
            BenchMethod::Em => "em",
        }
    }

    pub fn gradient(&self) -> Option<Method> {
        match self {
            BenchMethod::Gd => Some(Method::Gd),
            BenchMethod::Adam => Some(Method::Adam),
            BenchMethod::NewtonCg => Some(Method::NewtonCg),
            BenchMethod::Em => None,
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("em") {
            return Ok(BenchMethod::Em);
        }
        Ok(match s.parse::<Method>()? {
            Method::Gd => BenchMethod::Gd,
            Method::Adam => BenchMethod::Adam,
            Method::NewtonCg => BenchMethod::NewtonCg,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub ns: Vec<usize>,
    pub ps: Vec<usize>,
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<BenchMethod>,
    pub scale: f64,
    pub gd: OptConfig,
    pub adam: OptConfig,
    pub newton_cg: OptConfig,
    pub em: EmConfig,
}

impl SweepConfig {
    pub fn new(
        ns: Vec<usize>,
        ps: Vec<usize>,
        ks: Vec<usize>,
        seeds: Vec<u64>,
        methods: Vec<BenchMethod>,
    ) -> SweepConfig {
        SweepConfig {
            ns,
            ps,
            ks,
            seeds,
            methods,
            scale: 5.0,
            gd: OptConfig::new(Method::Gd),
            adam: OptConfig::new(Method::Adam),
            newton_cg: OptConfig::new(Method::NewtonCg),
            em: EmConfig::default(),
        }
    }

    fn opt(&self, m: Method) -> &OptConfig {
        match m {
            Method::Gd => &self.gd,
            Method::Adam => &self.adam,
            Method::NewtonCg => &self.newton_cg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [
            self.ns.len(),
            self.ps.len(),
            self.ks.len(),
            self.seeds.len(),
            self.methods.len(),
        ]
        .contains(&0)
        {
            return Err(Error::Config("benchmark grid must be non-empty".into()));
        }
        for &n in &self.ns {
            for &k in &self.ks {
                if k == 0 || k > n {
                    return Err(Error::Config(format!(
                        "need 1 <= K <= n (got K={k}, n={n})"
                    )));
                }
            }
        }
        if self.ps.contains(&0) {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        for m in [Method::Gd, Method::Adam, Method::NewtonCg] {
            self.opt(m).validate()?;
        }
        Ok(())
    }
}

/// One fit in the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub seed: u64,
    pub method: BenchMethod,
    /// Total log-likelihood at the final parameters.
    pub loglik: f64,
    pub ari: f64,
    pub iters: usize,
    pub wall_ms: f64,
    pub converged: bool,
    /// `ok`, `diverged`, or `error: …`.
    pub status: String,
}

impl BenchRecord {
    fn key(&self) -> (usize, usize, usize, u64, BenchMethod) {
        (self.n, self.p, self.k, self.seed, self.method)
    }
}

fn run_one(
    cfg: &SweepConfig,
    n: usize,
    p: usize,
    k: usize,
    seed: u64,
    method: BenchMethod,
) -> BenchRecord {
    let mut rec = BenchRecord {
        n,
        p,
        k,
        seed,
        method,
        loglik: f64::NAN,
        ari: f64::NAN,
        iters: 0,
        wall_ms: 0.0,
        converged: false,
        status: String::new(),
    };
    let outcome = (|| -> Result<()> {
        let sim = sample_mixture(&SimSpec {
            scale: cfg.scale,
            ..SimSpec::new(n, p, k, seed)
        })?;
        let data = &sim.data;
        let truth = data.labels().expect("simulated data is labelled");
        let init_seed = stream_key(&[seed, n as u64, p as u64, k as u64]);
        let means = initial_means(data, k, InitStrategy::Kmeans, init_seed)?;
        let (loglik, labels, iters, wall, converged, diverged) = match method.gradient() {
            Some(m) => {
                let init = ParamSet::from_means(ModelSpec::gmm(k, p)?, &means)?;
                let fit = fit_model(data, &init, cfg.opt(m))?;
                let labels = responsibilities(&fit.params, data)?.labels;
                let ll = total_loglik(&fit.params, data)?;
                (
                    ll,
                    labels,
                    fit.iters,
                    fit.wall_ms,
                    fit.converged,
                    fit.diverged,
                )
            }
            None => {
                let fit = em_fit_gmm(data, initial_mixture(&means), &cfg.em)?;
                let labels = fit.params.responsibilities(data)?.labels;
                let ll = fit.params.total_loglik(data)?;
                (
                    ll,
                    labels,
                    fit.iters,
                    fit.wall_ms,
                    fit.converged,
                    fit.diverged,
                )
            }
        };
        rec.loglik = loglik;
        rec.ari = ari(&labels, truth)?;
        rec.iters = iters;
        rec.wall_ms = wall;
        rec.converged = converged;
        rec.status = if diverged {
            "diverged".into()
        } else {
            "ok".into()
        };
        Ok(())
    })();
    if let Err(e) = outcome {
        log::warn!("benchmark cell n={n} p={p} K={k} seed={seed} {method}: {e}");
        rec.status = format!("error: {e}");
    }
    rec
}

/// Simulates every `(n, p, K, seed)` cell, shares one k-means initialization
/// across methods, and fits each method. Runs on the current rayon pool;
/// output is sorted by `(n, p, K, seed, method)` regardless of scheduling.
pub fn benchmark_sweep(cfg: &SweepConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for &n in &cfg.ns {
        for &p in &cfg.ps {
            for &k in &cfg.ks {
                for &seed in &cfg.seeds {
                    for &m in &cfg.methods {
                        jobs.push((n, p, k, seed, m));
                    }
                }
            }
        }
    }
    let mut records: Vec<BenchRecord> = jobs
        .into_par_iter()
        .map(|(n, p, k, seed, m)| run_one(cfg, n, p, k, seed, m))
        .collect();
    records.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(records)
}

/// `(q1, median, q3)` with linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some((at(0.25), at(0.5), at(0.75)))
}

/// Box-plot statistics for one `(p, K, n, method)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub p: usize,
    pub k: usize,
    pub n: usize,
    pub method: BenchMethod,
    /// Records with a finite log-likelihood.
    pub count: usize,
    pub loglik_min: f64,
    pub loglik_q1: f64,
    pub loglik_median: f64,
    pub loglik_q3: f64,
    pub loglik_max: f64,
    pub ari_median: f64,
    pub iters_median: f64,
}

pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, usize, usize, BenchMethod), Vec<&BenchRecord>> =
        BTreeMap::new();
    for r in records {
        groups.entry((r.p, r.k, r.n, r.method)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((p, k, n, method), rs)| {
            let ll: Vec<f64> = rs
                .iter()
                .map(|r| r.loglik)
                .filter(|v| v.is_finite())
                .collect();
            let aris: Vec<f64> = rs.iter().map(|r| r.ari).filter(|v| v.is_finite()).collect();
            let iters: Vec<f64> = rs.iter().map(|r| r.iters as f64).collect();
            let (q1, med, q3) = quartiles(&ll).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
            SummaryRow {
                p,
                k,
                n,
                method,
                count: ll.len(),
                loglik_min: ll.iter().copied().reduce(f64::min).unwrap_or(f64::NAN),
                loglik_q1: q1,
                loglik_median: med,
                loglik_q3: q3,
                loglik_max: ll.iter().copied().reduce(f64::max).unwrap_or(f64::NAN),
                ari_median: quartiles(&aris).map_or(f64::NAN, |q| q.1),
                iters_median: quartiles(&iters).map_or(f64::NAN, |q| q.1),
            }
        })
        .collect()
}
