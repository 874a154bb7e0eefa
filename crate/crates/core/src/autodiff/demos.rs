//! Small recursions used to demonstrate tape evaluation cost.

use super::{AdError, Graph, Tape};

/// Runs `l_{k+1} = 4 l_k (1 − l_k)`, `l_1 = x` on a tape and returns
/// `(l_n, dl_n/dx, tape length)`.
pub fn logistic_map_grad(x: f64, n: usize) -> Result<(f64, f64, usize), AdError> {
    if n == 0 {
        return Err(AdError::InvalidInput("logistic map needs n >= 1".into()));
    }
    let mut tape = Tape::with_capacity(4 * n);
    let input = tape.var(x)?;
    let mut l = input;
    for _ in 1..n {
        let neg = tape.neg(l)?;
        let one_minus = tape.offset(neg, 1.0)?;
        let prod = tape.mul(l, one_minus)?;
        l = tape.scale(prod, 4.0)?;
    }
    let g = tape.backward(l, &[input])?;
    Ok((g.value, g.grads[0], tape.len()))
}

/// Expanded closed forms of `l_n` and `dl_n/dx` for `n ≤ 4`.
pub fn logistic_closed_form(x: f64, n: usize) -> Option<(f64, f64)> {
    let poly = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &a| acc * x + a);
    match n {
        1 => Some((x, 1.0)),
        2 => Some((4.0 * x * (1.0 - x), 4.0 - 8.0 * x)),
        3 => Some((
            16.0 * x * (1.0 - x) * (1.0 - 2.0 * x).powi(2),
            16.0 * poly(&[1.0, -10.0, 24.0, -16.0]),
        )),
        4 => Some((
            64.0 * x * (1.0 - x) * (1.0 - 2.0 * x).powi(2) * (1.0 - 8.0 * x + 8.0 * x * x).powi(2),
            64.0 * poly(&[1.0, -42.0, 504.0, -2640.0, 7040.0, -9984.0, 7168.0, -2048.0]),
        )),
        _ => None,
    }
}

/// `l_0 = 1/(1+eˣ)`, `l_k = 1/(1+e^{l_{k−1}})`; returns `(l_n, dl_n/dx)`.
pub fn nested_sigmoid_grad(x: f64, n: usize) -> Result<(f64, f64), AdError> {
    let mut tape = Tape::with_capacity(3 * (n + 1) + 1);
    let input = tape.var(x)?;
    let mut l = input;
    for _ in 0..=n {
        let e = tape.exp(l)?;
        let d = tape.offset(e, 1.0)?;
        l = tape.powi(d, -1)?;
    }
    let g = tape.backward(l, &[input])?;
    Ok((g.value, g.grads[0]))
}
