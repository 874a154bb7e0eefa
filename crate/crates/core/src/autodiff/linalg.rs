//! Dense matrix helpers built from scalar graph nodes.
//!
//! Matrices are row-major `Vec`s. Lower-triangular matrices are stored packed
//! (row `i` holds `i + 1` entries) so structural zeros never reach the tape.

use super::{AdError, Graph};

/// Packed lower-triangular `p × p` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTri<V> {
    p: usize,
    data: Vec<V>,
}

pub const fn packed_len(p: usize) -> usize {
    p * (p + 1) / 2
}

impl<V: Copy> LowerTri<V> {
    pub fn from_packed(p: usize, data: Vec<V>) -> Result<Self, AdError> {
        if data.len() != packed_len(p) {
            return Err(AdError::DimensionMismatch {
                expected: packed_len(p),
                got: data.len(),
            });
        }
        Ok(LowerTri { p, data })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// Entry `(i, j)` for `j ≤ i`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> V {
        debug_assert!(j <= i && i < self.p);
        self.data[i * (i + 1) / 2 + j]
    }

    pub fn diag(&self, i: usize) -> V {
        self.get(i, i)
    }

    pub fn packed(&self) -> &[V] {
        &self.data
    }

    pub fn map<W>(&self, mut f: impl FnMut(usize, usize, V) -> W) -> LowerTri<W> {
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.p {
            for j in 0..=i {
                data.push(f(i, j, self.get(i, j)));
            }
        }
        LowerTri { p: self.p, data }
    }
}

/// Cholesky factor of a symmetric positive-definite `p × p` matrix (only the
/// lower triangle of `a` is read).
pub fn cholesky<G: Graph>(g: &mut G, a: &[G::Var], p: usize) -> Result<LowerTri<G::Var>, AdError> {
    check_square(a, p)?;
    let mut l: Vec<G::Var> = Vec::with_capacity(packed_len(p));
    let at = |l: &[G::Var], i: usize, j: usize| l[i * (i + 1) / 2 + j];
    for i in 0..p {
        for j in 0..=i {
            let mut acc = a[i * p + j];
            for k in 0..j {
                let t = g.mul(at(&l, i, k), at(&l, j, k))?;
                acc = g.sub(acc, t)?;
            }
            let entry = if i == j {
                g.sqrt(acc)?
            } else {
                g.div(acc, at(&l, j, j))?
            };
            l.push(entry);
        }
    }
    Ok(LowerTri { p, data: l })
}

/// Solves `L z = b` by forward substitution.
pub fn solve_lower<G: Graph>(
    g: &mut G,
    l: &LowerTri<G::Var>,
    b: &[G::Var],
) -> Result<Vec<G::Var>, AdError> {
    if b.len() != l.p {
        return Err(AdError::DimensionMismatch {
            expected: l.p,
            got: b.len(),
        });
    }
    let mut z: Vec<G::Var> = Vec::with_capacity(l.p);
    for i in 0..l.p {
        let mut acc = b[i];
        for (j, &zj) in z.iter().enumerate() {
            let t = g.mul(l.get(i, j), zj)?;
            acc = g.sub(acc, t)?;
        }
        z.push(g.div(acc, l.diag(i))?);
    }
    Ok(z)
}

/// `L Lᵀ` as a dense row-major matrix.
pub fn gram_lower<G: Graph>(g: &mut G, l: &LowerTri<G::Var>) -> Result<Vec<G::Var>, AdError> {
    let p = l.p;
    let mut out: Vec<Option<G::Var>> = vec![None; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut terms = Vec::with_capacity(j + 1);
            for k in 0..=j {
                terms.push(g.mul(l.get(i, k), l.get(j, k))?);
            }
            let s = g.sum(&terms)?;
            out[i * p + j] = Some(s);
            out[j * p + i] = Some(s);
        }
    }
    Ok(out.into_iter().map(|v| v.expect("filled")).collect())
}

/// `A B` for row-major `A: n × m`, `B: m × k`.
pub fn matmul<G: Graph>(
    g: &mut G,
    a: &[G::Var],
    b: &[G::Var],
    n: usize,
    m: usize,
    k: usize,
) -> Result<Vec<G::Var>, AdError> {
    if a.len() != n * m || b.len() != m * k {
        return Err(AdError::DimensionMismatch {
            expected: n * m,
            got: a.len(),
        });
    }
    let mut out = Vec::with_capacity(n * k);
    let mut col = Vec::with_capacity(m);
    for i in 0..n {
        for j in 0..k {
            col.clear();
            col.extend((0..m).map(|r| b[r * k + j]));
            out.push(g.dot(&a[i * m..(i + 1) * m], &col)?);
        }
    }
    Ok(out)
}

pub fn transpose<V: Copy>(a: &[V], n: usize, m: usize) -> Vec<V> {
    let mut out = Vec::with_capacity(a.len());
    for j in 0..m {
        for i in 0..n {
            out.push(a[i * m + j]);
        }
    }
    out
}

/// Solves `M X = B` for square `M` (`p × p`) and `B` (`p × r`) by Gaussian
/// elimination with partial pivoting. Pivot choice reads current node values;
/// every arithmetic step is a differentiable node.
pub fn solve<G: Graph>(
    g: &mut G,
    m: &[G::Var],
    b: &[G::Var],
    p: usize,
    r: usize,
) -> Result<Vec<G::Var>, AdError> {
    check_square(m, p)?;
    if b.len() != p * r {
        return Err(AdError::DimensionMismatch {
            expected: p * r,
            got: b.len(),
        });
    }
    let mut rows: Vec<Vec<G::Var>> = (0..p).map(|i| m[i * p..(i + 1) * p].to_vec()).collect();
    let mut rhs: Vec<Vec<G::Var>> = (0..p).map(|i| b[i * r..(i + 1) * r].to_vec()).collect();

    for c in 0..p {
        let pivot = (c..p)
            .max_by(|&x, &y| {
                g.value(rows[x][c])
                    .abs()
                    .total_cmp(&g.value(rows[y][c]).abs())
            })
            .expect("non-empty range");
        rows.swap(c, pivot);
        rhs.swap(c, pivot);
        for i in c + 1..p {
            let f = g.div(rows[i][c], rows[c][c])?;
            for j in c + 1..p {
                let t = g.mul(f, rows[c][j])?;
                rows[i][j] = g.sub(rows[i][j], t)?;
            }
            for j in 0..r {
                let t = g.mul(f, rhs[c][j])?;
                rhs[i][j] = g.sub(rhs[i][j], t)?;
            }
        }
    }

    let mut x: Vec<Vec<Option<G::Var>>> = vec![vec![None; r]; p];
    for i in (0..p).rev() {
        for j in 0..r {
            let mut acc = rhs[i][j];
            for k in i + 1..p {
                let t = g.mul(rows[i][k], x[k][j].expect("solved"))?;
                acc = g.sub(acc, t)?;
            }
            x[i][j] = Some(g.div(acc, rows[i][i])?);
        }
    }
    Ok(x.into_iter()
        .flatten()
        .map(|v| v.expect("solved"))
        .collect())
}

fn check_square<V>(a: &[V], p: usize) -> Result<(), AdError> {
    if a.len() != p * p {
        return Err(AdError::DimensionMismatch {
            expected: p * p,
            got: a.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{evaluate, finite_diff_grad, reverse_grad, Eval, GraphFn};
    use nalgebra::DMatrix;

    fn spd(p: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(p, p, |_, _| next());
        let m = &a * a.transpose() + DMatrix::identity(p, p) * 0.5;
        m.as_slice().to_vec()
    }

    #[test]
    fn cholesky_reconstructs() {
        let p = 4;
        let a = spd(p, 3);
        let mut g = Eval::new();
        let l = cholesky(&mut g, &a, p).unwrap();
        let back = gram_lower(&mut g, &l).unwrap();
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_elimination_solves() {
        let p = 5;
        let m = spd(p, 11);
        let b: Vec<f64> = (0..p * 2).map(|i| i as f64 - 3.0).collect();
        let x = solve(&mut Eval::new(), &m, &b, p, 2).unwrap();
        let mm = DMatrix::from_row_slice(p, p, &m);
        let xx = DMatrix::from_row_slice(p, 2, &x);
        let bb = DMatrix::from_row_slice(p, 2, &b);
        assert!((mm * xx - bb).abs().max() < 1e-12);
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let m = [0.0, 1.0, 1.0, 0.0];
        let x = solve(&mut Eval::new(), &m, &[2.0, 3.0], 2, 1).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    struct SolveTrace(usize);
    impl GraphFn for SolveTrace {
        fn eval<G: Graph>(&self, g: &mut G, x: &[G::Var]) -> Result<G::Var, AdError> {
            let p = self.0;
            let (m, b) = x.split_at(p * p);
            let sol = solve(g, m, b, p, 1)?;
            let l = cholesky(g, m, p)?;
            let z = solve_lower(g, &l, b)?;
            let a = g.sum(&sol)?;
            let c = g.dot(&z, &z)?;
            g.add(a, c)
        }
    }

    #[test]
    fn helpers_are_differentiable() {
        let p = 3;
        let mut x = spd(p, 5);
        x.extend([0.3, -1.0, 0.8]);
        let ad = reverse_grad(&SolveTrace(p), &x).unwrap();
        let fd = finite_diff_grad(|v| evaluate(&SolveTrace(p), v), &x, 1e-5).unwrap();
        for (a, b) in ad.grads.iter().zip(&fd) {
            assert!(crate::autodiff::rel_err(*a, *b) < 1e-6, "{a} vs {b}");
        }
    }
}
