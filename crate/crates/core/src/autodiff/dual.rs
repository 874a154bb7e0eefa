//! Forward-mode AD with dual numbers.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{operand, AdError, Graph, GraphFn, Op};

/// `value + deriv·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub value: f64,
    pub deriv: f64,
}

impl Dual {
    pub fn new(value: f64, deriv: f64) -> Self {
        Dual { value, deriv }
    }

    pub fn constant(value: f64) -> Self {
        Dual { value, deriv: 0.0 }
    }

    fn lift(self, op: Op, other: Option<Dual>) -> Option<Dual> {
        let b = other.unwrap_or_default();
        let (v, da, db) = op.eval(self.value, b.value)?;
        let deriv = if op.is_binary() {
            da * self.deriv + db * b.deriv
        } else {
            da * self.deriv
        };
        Some(Dual { value: v, deriv })
    }

    pub fn sin(self) -> Dual {
        Dual::new(self.value.sin(), self.value.cos() * self.deriv)
    }

    pub fn cos(self) -> Dual {
        Dual::new(self.value.cos(), -self.value.sin() * self.deriv)
    }

    pub fn exp(self) -> Dual {
        let e = self.value.exp();
        Dual::new(e, e * self.deriv)
    }

    pub fn ln(self) -> Dual {
        Dual::new(self.value.ln(), self.deriv / self.value)
    }
}

impl From<Dual> for f64 {
    fn from(d: Dual) -> f64 {
        d.value
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.value + rhs.value, self.deriv + rhs.deriv)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.value - rhs.value, self.deriv - rhs.deriv)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(
            self.value * rhs.value,
            self.deriv * rhs.value + self.value * rhs.deriv,
        )
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        let v = self.value / rhs.value;
        Dual::new(v, (self.deriv - v * rhs.deriv) / rhs.value)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.deriv)
    }
}

/// [`Graph`] backend propagating one tangent direction alongside values.
#[derive(Debug, Default)]
pub struct DualGraph {
    ops: usize,
}

impl DualGraph {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Graph for DualGraph {
    type Var = Dual;

    fn constant(&mut self, value: f64) -> Dual {
        Dual::constant(value)
    }

    fn value(&self, v: Dual) -> f64 {
        v.value
    }

    fn apply(&mut self, op: Op, a: Dual, b: Option<Dual>) -> Result<Dual, AdError> {
        let node = self.ops;
        self.ops += 1;
        operand(op, b)?;
        a.lift(op, b).ok_or(AdError::Domain {
            op: op.name(),
            node,
            a: a.value,
            b: b.map(|b| b.value),
        })
    }
}

/// Directional derivative `∇f(x)·direction` in a single forward pass.
pub fn forward_grad<F: GraphFn>(f: &F, x: &[f64], direction: &[f64]) -> Result<f64, AdError> {
    if x.len() != direction.len() {
        return Err(AdError::DimensionMismatch {
            expected: x.len(),
            got: direction.len(),
        });
    }
    let inputs: Vec<Dual> = x
        .iter()
        .zip(direction)
        .map(|(&v, &d)| Dual::new(v, d))
        .collect();
    let out = f.eval(&mut DualGraph::new(), &inputs)?;
    Ok(out.deriv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::reverse_grad;
    use std::f64::consts::FRAC_PI_2;

    struct Square;
    impl GraphFn for Square {
        fn eval<G: Graph>(&self, g: &mut G, x: &[G::Var]) -> Result<G::Var, AdError> {
            g.square(x[0])
        }
    }

    struct Example;
    impl GraphFn for Example {
        fn eval<G: Graph>(&self, g: &mut G, x: &[G::Var]) -> Result<G::Var, AdError> {
            let a = g.square(x[0])?;
            let b = g.sin(x[1])?;
            g.mul(a, b)
        }
    }

    /// Applies one op to the inputs.
    struct Single(Op);
    impl GraphFn for Single {
        fn eval<G: Graph>(&self, g: &mut G, x: &[G::Var]) -> Result<G::Var, AdError> {
            let b = self.0.is_binary().then(|| x[1]);
            g.apply(self.0, x[0], b)
        }
    }

    #[test]
    fn forward_examples() {
        assert_eq!(forward_grad(&Square, &[3.0], &[1.0]).unwrap(), 6.0);
        let d = forward_grad(&Example, &[2.0, FRAC_PI_2], &[1.0, 0.0]).unwrap();
        assert!((d - 4.0).abs() < 1e-12);
        assert_eq!(
            forward_grad(&Example, &[2.0, 0.3], &[0.0, 0.0]).unwrap(),
            0.0
        );
        assert!(matches!(
            forward_grad(&Example, &[2.0, 0.3], &[1.0]),
            Err(AdError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn every_op_agrees_between_modes() {
        let ops = [
            Op::Add,
            Op::Sub,
            Op::Mul,
            Op::Div,
            Op::Neg,
            Op::Sin,
            Op::Cos,
            Op::Exp,
            Op::Log,
            Op::Ln1p,
            Op::Sqrt,
            Op::Pow,
            Op::Powi(3),
            Op::Powi(-2),
            Op::Abs,
            Op::Lgamma,
            Op::LogSumExp,
            Op::Scale(-2.5),
            Op::Offset(0.75),
        ];
        let points = [[0.7, 1.9], [2.3, 0.4], [1.1, -0.6]];
        for op in ops {
            for x in points {
                let rev = reverse_grad(&Single(op), &x).unwrap();
                for (i, e) in [[1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
                    let fwd = forward_grad(&Single(op), &x, e).unwrap();
                    let scale = fwd.abs().max(rev.grads[i].abs()).max(1e-300);
                    assert!(
                        (fwd - rev.grads[i]).abs() <= 1e-12 * scale,
                        "{op:?} at {x:?}: fwd {fwd} rev {}",
                        rev.grads[i]
                    );
                }
            }
        }
    }

    #[test]
    fn operator_overloads_match_graph() {
        let x = Dual::new(0.8, 1.0);
        let y = Dual::new(-1.7, 0.0);
        let manual = (x * x + y).sin() / (x.exp() - y);
        struct F;
        impl GraphFn for F {
            fn eval<G: Graph>(&self, g: &mut G, v: &[G::Var]) -> Result<G::Var, AdError> {
                let xx = g.mul(v[0], v[0])?;
                let s = g.add(xx, v[1])?;
                let s = g.sin(s)?;
                let e = g.exp(v[0])?;
                let d = g.sub(e, v[1])?;
                g.div(s, d)
            }
        }
        let d = forward_grad(&F, &[0.8, -1.7], &[1.0, 0.0]).unwrap();
        assert!((manual.deriv - d).abs() < 1e-14);
    }
}
