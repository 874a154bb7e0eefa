//! Tape-based reverse-mode automatic differentiation over scalars.
//!
//! Every elementary operation is recorded on a [`Tape`] together with its
//! evaluated value and the local partial derivatives with respect to its
//! operands. A single reverse sweep over the tape then accumulates adjoints
//! from the output back to the inputs.
//!
//! Model code is written once against the [`Graph`] trait and can be run on
//! three backends:
//!
//! - [`Tape`]: records the evaluation trace for [`Tape::backward`].
//! - [`Eval`]: plain `f64` evaluation (line searches, finite differences).
//! - [`DualGraph`]: forward-mode directional derivatives.
//!
//! ```
//! use mixgrad::autodiff::{Graph, Tape};
//!
//! let mut tape = Tape::new();
//! let x1 = tape.var(2.0).unwrap();
//! let x2 = tape.var(std::f64::consts::FRAC_PI_2).unwrap();
//! let sq = tape.square(x1).unwrap();
//! let s = tape.sin(x2).unwrap();
//! let f = tape.mul(sq, s).unwrap();
//! let res = tape.backward(f, &[x1, x2]).unwrap();
//! assert!((res.grads[0] - 4.0).abs() < 1e-12);
//! assert!(res.grads[1].abs() < 1e-12);
//! ```

pub mod demos;
mod dual;
mod fd;
pub mod gradcheck;
pub mod linalg;
mod special;

use std::sync::atomic::{AtomicU32, Ordering};

use thiserror::Error;

pub use dual::{forward_grad, Dual, DualGraph};
pub use fd::{finite_diff_grad, rel_err, DEFAULT_FD_STEP};
pub use special::{digamma, ln_gamma};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{op} is outside its domain at node {node} (operands: {a:e}{})", b.map(|b| format!(", {b:e}")).unwrap_or_default())]
    Domain {
        op: &'static str,
        node: usize,
        a: f64,
        b: Option<f64>,
    },
    #[error("variable does not belong to this tape")]
    TapeMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0} expects a second operand")]
    MissingOperand(&'static str),
}

/// Elementary operations. Variants carrying a number treat it as a constant
/// folded into the node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    /// `ln(1 + a)`
    Ln1p,
    Sqrt,
    /// `a^b` with both operands variable; requires `a > 0`.
    Pow,
    /// `a^n` for a constant integer exponent.
    Powi(i32),
    Abs,
    Lgamma,
    /// Max-shifted `ln(e^a + e^b)`.
    LogSumExp,
    /// `c * a`
    Scale(f64),
    /// `a + c`
    Offset(f64),
}

impl Op {
    pub fn is_binary(&self) -> bool {
        matches!(
            self,
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow | Op::LogSumExp
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Ln1p => "ln1p",
            Op::Sqrt => "sqrt",
            Op::Pow => "pow",
            Op::Powi(_) => "powi",
            Op::Abs => "abs",
            Op::Lgamma => "lgamma",
            Op::LogSumExp => "logsumexp_pair",
            Op::Scale(_) => "scale",
            Op::Offset(_) => "offset",
        }
    }

    /// Value and local partials `(∂/∂a, ∂/∂b)`, or `None` outside the domain
    /// or when the value is not finite. Unary ops report `0` for `∂/∂b`.
    pub fn eval(&self, a: f64, b: f64) -> Option<(f64, f64, f64)> {
        let (v, da, db) = match *self {
            Op::Add => (a + b, 1.0, 1.0),
            Op::Sub => (a - b, 1.0, -1.0),
            Op::Mul => (a * b, b, a),
            Op::Div => {
                if b == 0.0 {
                    return None;
                }
                let v = a / b;
                (v, 1.0 / b, -v / b)
            }
            Op::Neg => (-a, -1.0, 0.0),
            Op::Sin => (a.sin(), a.cos(), 0.0),
            Op::Cos => (a.cos(), -a.sin(), 0.0),
            Op::Exp => {
                let v = a.exp();
                (v, v, 0.0)
            }
            Op::Log => {
                if a <= 0.0 {
                    return None;
                }
                (a.ln(), 1.0 / a, 0.0)
            }
            Op::Ln1p => {
                if a <= -1.0 {
                    return None;
                }
                (a.ln_1p(), 1.0 / (1.0 + a), 0.0)
            }
            Op::Sqrt => {
                if a < 0.0 {
                    return None;
                }
                let v = a.sqrt();
                (v, 0.5 / v, 0.0)
            }
            Op::Pow => {
                if a < 0.0 || (a == 0.0 && b < 1.0) {
                    return None;
                }
                let v = a.powf(b);
                let dlog = if a == 0.0 { 0.0 } else { v * a.ln() };
                (v, b * a.powf(b - 1.0), dlog)
            }
            Op::Powi(n) => {
                if n < 0 && a == 0.0 {
                    return None;
                }
                (a.powi(n), f64::from(n) * a.powi(n - 1), 0.0)
            }
            Op::Abs => (a.abs(), a.signum(), 0.0),
            Op::Lgamma => {
                if a <= 0.0 && a == a.floor() {
                    return None;
                }
                (ln_gamma(a), digamma(a), 0.0)
            }
            Op::LogSumExp => {
                let t = (-(a - b).abs()).exp();
                let v = a.max(b) + t.ln_1p();
                let (hi, lo) = (1.0 / (1.0 + t), t / (1.0 + t));
                if a >= b {
                    (v, hi, lo)
                } else {
                    (v, lo, hi)
                }
            }
            Op::Scale(c) => (c * a, c, 0.0),
            Op::Offset(c) => (a + c, 1.0, 0.0),
        };
        v.is_finite().then_some((v, da, db))
    }
}

/// A computation backend. See the module docs.
pub trait Graph {
    type Var: Copy;

    fn constant(&mut self, value: f64) -> Self::Var;
    fn value(&self, v: Self::Var) -> f64;
    fn apply(&mut self, op: Op, a: Self::Var, b: Option<Self::Var>) -> Result<Self::Var, AdError>;

    fn add(&mut self, a: Self::Var, b: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Add, a, Some(b))
    }
    fn sub(&mut self, a: Self::Var, b: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Sub, a, Some(b))
    }
    fn mul(&mut self, a: Self::Var, b: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Mul, a, Some(b))
    }
    fn div(&mut self, a: Self::Var, b: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Div, a, Some(b))
    }
    fn pow(&mut self, a: Self::Var, b: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Pow, a, Some(b))
    }
    fn logsumexp_pair(&mut self, a: Self::Var, b: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::LogSumExp, a, Some(b))
    }
    fn neg(&mut self, a: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Neg, a, None)
    }
    fn sin(&mut self, a: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Sin, a, None)
    }
    fn cos(&mut self, a: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Cos, a, None)
    }
    fn exp(&mut self, a: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Exp, a, None)
    }
    fn ln(&mut self, a: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Log, a, None)
    }
    fn ln_1p(&mut self, a: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Ln1p, a, None)
    }
    fn sqrt(&mut self, a: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Sqrt, a, None)
    }
    fn powi(&mut self, a: Self::Var, n: i32) -> Result<Self::Var, AdError> {
        self.apply(Op::Powi(n), a, None)
    }
    fn square(&mut self, a: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Powi(2), a, None)
    }
    fn abs(&mut self, a: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Abs, a, None)
    }
    fn lgamma(&mut self, a: Self::Var) -> Result<Self::Var, AdError> {
        self.apply(Op::Lgamma, a, None)
    }
    fn scale(&mut self, a: Self::Var, c: f64) -> Result<Self::Var, AdError> {
        self.apply(Op::Scale(c), a, None)
    }
    fn offset(&mut self, a: Self::Var, c: f64) -> Result<Self::Var, AdError> {
        self.apply(Op::Offset(c), a, None)
    }

    /// Left fold of additions; an empty slice yields the constant 0.
    fn sum(&mut self, terms: &[Self::Var]) -> Result<Self::Var, AdError> {
        match terms.split_first() {
            None => Ok(self.constant(0.0)),
            Some((&first, rest)) => rest.iter().try_fold(first, |acc, &t| self.add(acc, t)),
        }
    }

    /// Stable `ln Σ e^{tᵢ}` as a chain of fused pairwise nodes.
    fn logsumexp(&mut self, terms: &[Self::Var]) -> Result<Self::Var, AdError> {
        match terms.split_first() {
            None => Err(AdError::InvalidInput("logsumexp of no terms".into())),
            Some((&first, rest)) => rest
                .iter()
                .try_fold(first, |acc, &t| self.logsumexp_pair(acc, t)),
        }
    }

    fn dot(&mut self, a: &[Self::Var], b: &[Self::Var]) -> Result<Self::Var, AdError> {
        if a.len() != b.len() {
            return Err(AdError::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        let mut acc: Option<Self::Var> = None;
        for (&x, &y) in a.iter().zip(b) {
            let t = self.mul(x, y)?;
            acc = Some(match acc {
                None => t,
                Some(s) => self.add(s, t)?,
            });
        }
        Ok(acc.unwrap_or_else(|| self.constant(0.0)))
    }
}

/// A function that can be built on any [`Graph`] backend.
pub trait GraphFn {
    fn eval<G: Graph>(&self, g: &mut G, x: &[G::Var]) -> Result<G::Var, AdError>;
}

/// Plain floating-point evaluation. Counts operations so domain errors can
/// still report a position in the trace.
#[derive(Debug, Default, Clone)]
pub struct Eval {
    ops: usize,
}

impl Eval {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Graph for Eval {
    type Var = f64;

    fn constant(&mut self, value: f64) -> f64 {
        value
    }

    fn value(&self, v: f64) -> f64 {
        v
    }

    #[inline]
    fn apply(&mut self, op: Op, a: f64, b: Option<f64>) -> Result<f64, AdError> {
        let node = self.ops;
        self.ops += 1;
        let bv = operand(op, b)?;
        op.eval(a, bv).map(|(v, _, _)| v).ok_or(AdError::Domain {
            op: op.name(),
            node,
            a,
            b,
        })
    }
}

pub(crate) fn operand<V: Copy + Into<f64>>(op: Op, b: Option<V>) -> Result<f64, AdError> {
    match (op.is_binary(), b) {
        (true, Some(b)) => Ok(b.into()),
        (true, None) => Err(AdError::MissingOperand(op.name())),
        (false, _) => Ok(0.0),
    }
}

/// Evaluates `f` at `x` with plain floats.
pub fn evaluate<F: GraphFn>(f: &F, x: &[f64]) -> Result<f64, AdError> {
    f.eval(&mut Eval::new(), x)
}

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

fn fresh_tape_id() -> u32 {
    NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed)
}

/// Reference to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarRef {
    tape: u32,
    index: u32,
}

impl VarRef {
    pub fn index(&self) -> usize {
        self.index as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Opcode {
    Input,
    Const,
    Op(Op),
}

#[derive(Debug, Clone, Copy)]
struct Node {
    code: Opcode,
    args: [u32; 2],
    value: f64,
    partials: [f64; 2],
}

/// Output of a reverse sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GradResult {
    pub value: f64,
    /// One entry per requested input, in request order.
    pub grads: Vec<f64>,
}

/// Append-only evaluation trace (Wengert list).
///
/// Operand indices of every node point strictly backwards, so the node order
/// is a topological order of the computational graph.
#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::with_capacity(0)
    }

    pub fn with_capacity(nodes: usize) -> Self {
        Tape {
            id: fresh_tape_id(),
            nodes: Vec::with_capacity(nodes),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops all nodes but keeps the allocation. Previously issued
    /// [`VarRef`]s are invalidated.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.id = fresh_tape_id();
    }

    /// Registers an independent variable.
    pub fn var(&mut self, value: f64) -> Result<VarRef, AdError> {
        if !value.is_finite() {
            return Err(AdError::InvalidInput(format!(
                "input value must be finite, got {value}"
            )));
        }
        Ok(self.push(Opcode::Input, [0, 0], value, [0.0, 0.0]))
    }

    pub fn vars(&mut self, values: &[f64]) -> Result<Vec<VarRef>, AdError> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn opcode(&self, v: VarRef) -> Result<Opcode, AdError> {
        self.check(v)?;
        Ok(self.nodes[v.index()].code)
    }

    /// Local partials stored on a node (`∂/∂a`, `∂/∂b`).
    pub fn partials(&self, v: VarRef) -> Result<[f64; 2], AdError> {
        self.check(v)?;
        Ok(self.nodes[v.index()].partials)
    }

    fn push(&mut self, code: Opcode, args: [u32; 2], value: f64, partials: [f64; 2]) -> VarRef {
        let index = u32::try_from(self.nodes.len()).expect("tape exceeds u32 nodes");
        self.nodes.push(Node {
            code,
            args,
            value,
            partials,
        });
        VarRef {
            tape: self.id,
            index,
        }
    }

    #[inline]
    fn check(&self, v: VarRef) -> Result<(), AdError> {
        if v.tape != self.id || v.index() >= self.nodes.len() {
            return Err(AdError::TapeMismatch);
        }
        Ok(())
    }

    /// Single reverse sweep from `output`; the tape itself is not modified.
    pub fn backward(&self, output: VarRef, inputs: &[VarRef]) -> Result<GradResult, AdError> {
        self.check(output)?;
        for &v in inputs {
            self.check(v)?;
        }
        let out = output.index();
        let mut adjoint = vec![0.0; out + 1];
        adjoint[out] = 1.0;
        for i in (0..=out).rev() {
            let adj = adjoint[i];
            if adj == 0.0 {
                continue;
            }
            let node = &self.nodes[i];
            if let Opcode::Op(op) = node.code {
                let [a, b] = node.args;
                adjoint[a as usize] += adj * node.partials[0];
                if op.is_binary() {
                    adjoint[b as usize] += adj * node.partials[1];
                }
            }
        }
        let grads = inputs
            .iter()
            .map(|v| adjoint.get(v.index()).copied().unwrap_or(0.0))
            .collect();
        Ok(GradResult {
            value: self.nodes[out].value,
            grads,
        })
    }
}

impl Graph for Tape {
    type Var = VarRef;

    fn constant(&mut self, value: f64) -> VarRef {
        debug_assert!(value.is_finite());
        self.push(Opcode::Const, [0, 0], value, [0.0, 0.0])
    }

    fn value(&self, v: VarRef) -> f64 {
        self.nodes[v.index()].value
    }

    #[inline]
    fn apply(&mut self, op: Op, a: VarRef, b: Option<VarRef>) -> Result<VarRef, AdError> {
        self.check(a)?;
        if let Some(b) = b {
            self.check(b)?;
        }
        let av = self.nodes[a.index()].value;
        let bv = if op.is_binary() {
            let b = b.ok_or(AdError::MissingOperand(op.name()))?;
            Some(self.nodes[b.index()].value)
        } else {
            None
        };
        let (v, da, db) = op.eval(av, bv.unwrap_or(0.0)).ok_or(AdError::Domain {
            op: op.name(),
            node: self.nodes.len(),
            a: av,
            b: bv,
        })?;
        let bidx = if op.is_binary() {
            b.map_or(0, |b| b.index)
        } else {
            a.index
        };
        Ok(self.push(Opcode::Op(op), [a.index, bidx], v, [da, db]))
    }
}

/// Value and gradient of `f` at `x` via one forward build and one reverse
/// sweep.
pub fn reverse_grad<F: GraphFn>(f: &F, x: &[f64]) -> Result<GradResult, AdError> {
    let mut tape = Tape::new();
    let inputs = tape.vars(x)?;
    let out = f.eval(&mut tape, &inputs)?;
    tape.backward(out, &inputs)
}
