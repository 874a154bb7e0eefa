//! Random composite expressions for checking reverse sweeps against finite
//! differences.
//!
//! Every node keeps its output roughly within `[-2.5, 2.5]` when its operands
//! are, so derivatives stay moderate at any depth and central differences
//! remain a sharp oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{evaluate, finite_diff_grad, rel_err, reverse_grad, AdError, Graph, GraphFn};

#[derive(Debug, Clone)]
pub enum Expr {
    Input(usize),
    /// `(a + b) / 2`
    Mean(Box<Expr>, Box<Expr>),
    /// `(a − b) / 2`
    HalfDiff(Box<Expr>, Box<Expr>),
    /// `a·b / 2`
    HalfProd(Box<Expr>, Box<Expr>),
    /// `a / (1 + b²)`
    Ratio(Box<Expr>, Box<Expr>),
    /// `(1 + a²)^{b/4}`
    Power(Box<Expr>, Box<Expr>),
    /// `logsumexp(a, b) − ln 2`
    SoftMax(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Neg(Box<Expr>),
    /// `e^{a/2} − 1`
    Exp(Box<Expr>),
    /// `ln(1 + a²)`
    LogSq(Box<Expr>),
    /// `√(1 + a²) − 1`
    Hypot(Box<Expr>),
    /// `lgamma(1 + a²) / 2`
    Lgamma(Box<Expr>),
    /// `a² / 2`
    HalfSq(Box<Expr>),
}

impl Expr {
    /// Random expression of at most `depth` levels over `inputs` variables.
    pub fn random<R: Rng>(rng: &mut R, depth: usize, inputs: usize) -> Expr {
        if depth == 0 || rng.random_bool(0.15) {
            return Expr::Input(rng.random_range(0..inputs));
        }
        let choice = rng.random_range(0..14u32);
        let a = Box::new(Expr::random(rng, depth - 1, inputs));
        match choice {
            0..=5 => {
                let b = Box::new(Expr::random(rng, depth - 1, inputs));
                match choice {
                    0 => Expr::Mean(a, b),
                    1 => Expr::HalfDiff(a, b),
                    2 => Expr::HalfProd(a, b),
                    3 => Expr::Ratio(a, b),
                    4 => Expr::Power(a, b),
                    _ => Expr::SoftMax(a, b),
                }
            }
            6 => Expr::Sin(a),
            7 => Expr::Cos(a),
            8 => Expr::Neg(a),
            9 => Expr::Exp(a),
            10 => Expr::LogSq(a),
            11 => Expr::Hypot(a),
            12 => Expr::Lgamma(a),
            _ => Expr::HalfSq(a),
        }
    }

    fn build<G: Graph>(&self, g: &mut G, x: &[G::Var]) -> Result<G::Var, AdError> {
        let one_plus_sq = |g: &mut G, v| -> Result<G::Var, AdError> {
            let s = g.square(v)?;
            g.offset(s, 1.0)
        };
        Ok(match self {
            Expr::Input(i) => x[*i],
            Expr::Mean(a, b) => {
                let (a, b) = (a.build(g, x)?, b.build(g, x)?);
                let s = g.add(a, b)?;
                g.scale(s, 0.5)?
            }
            Expr::HalfDiff(a, b) => {
                let (a, b) = (a.build(g, x)?, b.build(g, x)?);
                let s = g.sub(a, b)?;
                g.scale(s, 0.5)?
            }
            Expr::HalfProd(a, b) => {
                let (a, b) = (a.build(g, x)?, b.build(g, x)?);
                let s = g.mul(a, b)?;
                g.scale(s, 0.5)?
            }
            Expr::Ratio(a, b) => {
                let (a, b) = (a.build(g, x)?, b.build(g, x)?);
                let d = one_plus_sq(g, b)?;
                g.div(a, d)?
            }
            Expr::Power(a, b) => {
                let (a, b) = (a.build(g, x)?, b.build(g, x)?);
                let base = one_plus_sq(g, a)?;
                let e = g.scale(b, 0.25)?;
                g.pow(base, e)?
            }
            Expr::SoftMax(a, b) => {
                let (a, b) = (a.build(g, x)?, b.build(g, x)?);
                let l = g.logsumexp_pair(a, b)?;
                g.offset(l, -std::f64::consts::LN_2)?
            }
            Expr::Sin(a) => {
                let a = a.build(g, x)?;
                g.sin(a)?
            }
            Expr::Cos(a) => {
                let a = a.build(g, x)?;
                g.cos(a)?
            }
            Expr::Neg(a) => {
                let a = a.build(g, x)?;
                g.neg(a)?
            }
            Expr::Exp(a) => {
                let a = a.build(g, x)?;
                let h = g.scale(a, 0.5)?;
                let e = g.exp(h)?;
                g.offset(e, -1.0)?
            }
            Expr::LogSq(a) => {
                let a = a.build(g, x)?;
                let s = one_plus_sq(g, a)?;
                g.ln(s)?
            }
            Expr::Hypot(a) => {
                let a = a.build(g, x)?;
                let s = one_plus_sq(g, a)?;
                let r = g.sqrt(s)?;
                g.offset(r, -1.0)?
            }
            Expr::Lgamma(a) => {
                let a = a.build(g, x)?;
                let s = one_plus_sq(g, a)?;
                let l = g.lgamma(s)?;
                g.scale(l, 0.5)?
            }
            Expr::HalfSq(a) => {
                let a = a.build(g, x)?;
                let s = g.square(a)?;
                g.scale(s, 0.5)?
            }
        })
    }
}

impl GraphFn for Expr {
    fn eval<G: Graph>(&self, g: &mut G, x: &[G::Var]) -> Result<G::Var, AdError> {
        self.build(g, x)
    }
}

/// Summary of a batch of gradient checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckSummary {
    pub cases: usize,
    pub max_rel_err: f64,
}

/// Compares reverse-mode gradients with central differences on `count`
/// random expressions of depth ≤ `depth` with inputs drawn from `[-2, 2]`.
pub fn check_random_expressions(
    count: usize,
    depth: usize,
    inputs: usize,
    seed: u64,
) -> Result<CheckSummary, AdError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_err = 0.0f64;
    for _ in 0..count {
        let expr = Expr::random(&mut rng, depth, inputs);
        let x: Vec<f64> = (0..inputs).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ad = reverse_grad(&expr, &x)?;
        let fd = finite_diff_grad(|p| evaluate(&expr, p), &x, super::DEFAULT_FD_STEP)?;
        for (a, b) in ad.grads.iter().zip(&fd) {
            max_rel_err = max_rel_err.max(rel_err(*a, *b));
        }
    }
    Ok(CheckSummary {
        cases: count,
        max_rel_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_random_expressions_match_finite_differences() {
        let s = check_random_expressions(50, 8, 3, 2024).unwrap();
        assert_eq!(s.cases, 50);
        assert!(s.max_rel_err < 1e-6, "max rel err {}", s.max_rel_err);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = check_random_expressions(10, 6, 2, 9).unwrap();
        let b = check_random_expressions(10, 6, 2, 9).unwrap();
        assert_eq!(a, b);
    }
}
