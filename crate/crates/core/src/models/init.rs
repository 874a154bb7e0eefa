use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layout::{Layout, ParamSet, SegmentKind};
use super::spec::{Family, ModelSpec};
use crate::data::Dataset;
use crate::rng::{stream, tag};
use crate::{Error, Result};

const LLOYD_MAX_ITER: usize = 100;
/// Initial degrees of freedom for t components.
pub const INITIAL_DOF: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitStrategy {
    /// k-means++ seeding refined by Lloyd iterations.
    Kmeans,
    /// Distinct data points drawn uniformly.
    Random,
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitStrategy::Kmeans => "kmeans",
            InitStrategy::Random => "random",
        })
    }
}

impl FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(InitStrategy::Kmeans),
            "random" => Ok(InitStrategy::Random),
            _ => Err(Error::Config(format!(
                "unknown init strategy {s:?} (expected kmeans or random)"
            ))),
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centers.iter().enumerate() {
        let d = sq_dist(x, m);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp<R: Rng>(data: &Dataset, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = data.n();
    let mut centers = vec![data.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = data.rows().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (i, x) in data.rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    centers
}

/// Lloyd's algorithm from k-means++ seeds. Returns centers and labels.
pub fn kmeans<R: Rng>(
    data: &Dataset,
    k: usize,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    check_k(data, k)?;
    let p = data.p();
    let mut centers = kmeans_pp(data, k, rng);
    let mut labels = vec![usize::MAX; data.n()];
    for _ in 0..LLOYD_MAX_ITER {
        let mut changed = false;
        for (i, x) in data.rows().enumerate() {
            let c = nearest(x, &centers).0;
            changed |= labels[i] != c;
            labels[i] = c;
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        for (x, &c) in data.rows().zip(&labels) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(x) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok((centers, labels))
}

fn check_k(data: &Dataset, k: usize) -> Result<()> {
    if k == 0 || k > data.n() {
        return Err(Error::InvalidInput(format!(
            "need 1 <= K <= n (got K={k}, n={})",
            data.n()
        )));
    }
    Ok(())
}

/// Initial component means, deterministic in `seed`.
pub fn initial_means(
    data: &Dataset,
    k: usize,
    strategy: InitStrategy,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_k(data, k)?;
    let mut rng = stream(&[tag::INIT, seed]);
    match strategy {
        InitStrategy::Kmeans => Ok(kmeans(data, k, &mut rng)?.0),
        InitStrategy::Random => Ok(sample(&mut rng, data.n(), k)
            .into_iter()
            .map(|i| data.row(i).to_vec())
            .collect()),
    }
}

impl ParamSet {
    /// Uniform weights, the given means, and identity-like covariances.
    pub fn from_means(spec: ModelSpec, means: &[Vec<f64>]) -> Result<ParamSet> {
        spec.validate()?;
        let (k, p, q) = (spec.k, spec.p, spec.latent());
        if means.len() != k || means.iter().any(|m| m.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: k * p,
                got: means.iter().map(Vec::len).sum(),
            });
        }
        let layout = Layout::new(&spec);
        let mut ps = ParamSet {
            spec,
            theta: vec![0.0; layout.len],
        };
        ps.slice_mut(SegmentKind::Mean)
            .copy_from_slice(&means.concat());
        for s in &layout.segments {
            for b in 0..s.blocks {
                let block = &mut ps.theta[s.block(b)];
                match s.kind {
                    SegmentKind::Factor => {
                        for i in 0..p {
                            block[i * (i + 1) / 2 + i] = 1.0;
                        }
                    }
                    SegmentKind::Loading => {
                        // Λ = [½ I_q; 0]: zero loadings are a stationary point.
                        let mut off = 0;
                        for i in 0..p {
                            let row = (i + 1).min(q);
                            if i < q {
                                block[off + i] = 0.5;
                            }
                            off += row;
                        }
                    }
                    SegmentKind::LogDof => block[0] = INITIAL_DOF.ln(),
                    _ => {}
                }
            }
        }
        debug_assert!(spec.family != Family::Tmm || !ps.slice(SegmentKind::LogDof).is_empty());
        ParamSet::new(spec, ps.theta)
    }
}

/// Fresh parameters for `spec` on `data`.
pub fn init_params(
    spec: &ModelSpec,
    data: &Dataset,
    strategy: InitStrategy,
    seed: u64,
) -> Result<ParamSet> {
    if data.p() != spec.p {
        return Err(Error::DimensionMismatch {
            expected: spec.p,
            got: data.p(),
        });
    }
    let means = initial_means(data, spec.k, strategy, seed)?;
    ParamSet::from_means(*spec, &means)
}
