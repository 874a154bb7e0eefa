//! Unconstrained maximizers driven by exact gradients: gradient ascent,
//! Adam, and truncated Newton with conjugate-gradient inner solves.
//!
//! All methods ascend directly and stop when the objective changes by less
//! than `tol` between iterations or after `max_iter` iterations.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A scalar function to maximize over `ℝ^dim`.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64]) -> Result<f64>;
    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gd,
    Adam,
    NewtonCg,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Adam => "adam",
            Method::NewtonCg => "newton_cg",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gd" => Ok(Method::Gd),
            "adam" => Ok(Method::Adam),
            "newton_cg" | "newtoncg" => Ok(Method::NewtonCg),
            _ => Err(Error::Config(format!(
                "unknown method {s:?} (expected gd, adam or newton-cg)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub method: Method,
    /// Step size; unused by Newton-CG, which takes unit steps with backtracking.
    pub lr: f64,
    /// Heavy-ball momentum for GD, first-moment decay for Adam.
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl OptConfig {
    /// Benchmark defaults: lr 3e-4, 1000 iterations, tolerance 1e-6.
    pub fn new(method: Method) -> OptConfig {
        OptConfig {
            method,
            lr: 3e-4,
            beta1: if method == Method::Adam { 0.9 } else { 0.0 },
            beta2: 0.999,
            eps: 1e-8,
            max_iter: 1000,
            tol: 1e-6,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.tol > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<P> {
    pub params: P,
    /// Objective after each iteration, starting with the initial value.
    pub trajectory: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub diverged: bool,
    pub wall_ms: f64,
}

impl<P> FitResult<P> {
    pub fn final_value(&self) -> f64 {
        *self.trajectory.last().expect("trajectory is never empty")
    }

    pub fn map<Q>(self, f: impl FnOnce(P) -> Q) -> FitResult<Q> {
        FitResult {
            params: f(self.params),
            trajectory: self.trajectory,
            iters: self.iters,
            converged: self.converged,
            diverged: self.diverged,
            wall_ms: self.wall_ms,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(theta: &[f64], step: f64, d: &[f64]) -> Vec<f64> {
    theta.iter().zip(d).map(|(t, x)| t + step * x).collect()
}

/// `H v` by central differences of the gradient.
pub fn hessian_vector_product<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    v: &[f64],
) -> Result<Vec<f64>> {
    if v.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: v.len(),
        });
    }
    let nv = norm(v);
    if nv == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    let h = f64::EPSILON.sqrt() * (1.0 + norm(theta)) / nv.max(1e-12);
    let (_, gp) = obj.value_grad(&axpy(theta, h, v))?;
    let (_, gm) = obj.value_grad(&axpy(theta, -h, v))?;
    let out: Vec<f64> = gp
        .iter()
        .zip(&gm)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite Hessian-vector product".into()));
    }
    Ok(out)
}

/// Approximately solves `(−H) d = g` by linear CG; falls back to `g` when
/// negative curvature shows up before any progress, or when the result is
/// not an ascent direction.
fn newton_direction<O: Objective + ?Sized>(obj: &O, theta: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let gnorm = norm(g);
    let forcing = 0.5 * gnorm.sqrt().min(1.0) * gnorm;
    let mut d = vec![0.0; g.len()];
    let mut r = g.to_vec();
    let mut dir = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..g.len() {
        let ap: Vec<f64> = hessian_vector_product(obj, theta, &dir)?
            .into_iter()
            .map(|x| -x)
            .collect();
        let curv = dot(&dir, &ap);
        if !(curv > 0.0) {
            if it == 0 {
                return Ok(g.to_vec());
            }
            break;
        }
        let alpha = rr / curv;
        for i in 0..d.len() {
            d[i] += alpha * dir[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() < forcing {
            break;
        }
        let beta = rr_new / rr;
        for i in 0..dir.len() {
            dir[i] = r[i] + beta * dir[i];
        }
        rr = rr_new;
    }
    if dot(&d, g) > 0.0 {
        Ok(d)
    } else {
        Ok(g.to_vec())
    }
}

/// Maximizes `obj` from `theta0`.
pub fn maximize<O: Objective + ?Sized>(
    obj: &O,
    theta0: Vec<f64>,
    cfg: &OptConfig,
) -> Result<FitResult<Vec<f64>>> {
    cfg.validate()?;
    if theta0.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: theta0.len(),
        });
    }
    let start = Instant::now();
    let (mut value, mut grad) = obj.value_grad(&theta0)?;
    if !value.is_finite() {
        return Err(Error::Numeric(
            "objective is not finite at the starting point".into(),
        ));
    }
    let mut theta = theta0;
    let mut trajectory = vec![value];
    let mut converged = false;
    let mut diverged = false;
    let dim = theta.len();
    let mut m = vec![0.0; dim];
    let mut s = vec![0.0; dim];

    for t in 1..=cfg.max_iter {
        let next = match cfg.method {
            Method::Gd => {
                for i in 0..dim {
                    m[i] = cfg.beta1 * m[i] + grad[i];
                }
                axpy(&theta, cfg.lr, &m)
            }
            Method::Adam => {
                let c1 = 1.0 - cfg.beta1.powi(t as i32);
                let c2 = 1.0 - cfg.beta2.powi(t as i32);
                let mut next = theta.clone();
                for i in 0..dim {
                    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
                    s[i] = cfg.beta2 * s[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                    next[i] += cfg.lr * (m[i] / c1) / ((s[i] / c2).sqrt() + cfg.eps);
                }
                next
            }
            Method::NewtonCg => {
                let d = match newton_direction(obj, &theta, &grad) {
                    Ok(d) => d,
                    Err(e) => {
                        log::debug!("newton-cg: direction failed at iteration {t}: {e}");
                        diverged = true;
                        break;
                    }
                };
                let mut step = 1.0;
                let mut accepted = None;
                for _ in 0..=20 {
                    let cand = axpy(&theta, step, &d);
                    if matches!(obj.value(&cand), Ok(v) if v.is_finite() && v >= value) {
                        accepted = Some(cand);
                        break;
                    }
                    step *= 0.5;
                }
                match accepted {
                    Some(c) => c,
                    None => {
                        log::debug!("newton-cg: backtracking exhausted at iteration {t}");
                        trajectory.push(value);
                        converged = true;
                        break;
                    }
                }
            }
        };
        match obj.value_grad(&next) {
            Ok((v, g)) if v.is_finite() && g.iter().all(|x| x.is_finite()) => {
                let delta = (v - value).abs();
                theta = next;
                value = v;
                grad = g;
                trajectory.push(value);
                if delta < cfg.tol {
                    converged = true;
                    break;
                }
            }
            other => {
                if let Err(e) = other {
                    log::debug!("{}: objective failed at iteration {t}: {e}", cfg.method);
                }
                diverged = true;
                break;
            }
        }
    }

    Ok(FitResult {
        params: theta,
        iters: trajectory.len() - 1,
        trajectory,
        converged,
        diverged,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
