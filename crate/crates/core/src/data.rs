use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `n × p` observations stored row-major, with optional ground-truth labels
/// kept for evaluation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    p: usize,
    x: Vec<f64>,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(n: usize, p: usize, x: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput(format!(
                "dataset must be non-empty (got n={n}, p={p})"
            )));
        }
        if x.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                got: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                i / p,
                i % p
            )));
        }
        Ok(Dataset {
            n,
            p,
            x,
            labels: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} columns, expected {p}",
                rows[i].len()
            )));
        }
        Dataset::new(rows.len(), p, rows.concat())
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.p)
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }
}

/// Posterior membership probabilities and the implied hard labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub k: usize,
    /// `n × k`, row-major.
    pub gamma: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Assignment {
    /// Normalizes rows of unnormalized log-weights in log space.
    pub fn from_log_weights(log_w: &[f64], k: usize) -> Assignment {
        let mut gamma = Vec::with_capacity(log_w.len());
        let mut labels = Vec::with_capacity(log_w.len() / k.max(1));
        for row in log_w.chunks_exact(k) {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            let start = gamma.len();
            gamma.extend(row.iter().map(|v| (v - lse).exp()));
            let r = &gamma[start..];
            labels.push(argmax(r));
        }
        Assignment { k, gamma, labels }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.gamma[i * self.k..(i + 1) * self.k]
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Dataset::new(0, 2, vec![]).is_err());
        assert!(Dataset::new(1, 2, vec![1.0]).is_err());
        assert!(Dataset::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Dataset::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let d = Dataset::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert!(d.clone().with_labels(vec![0]).is_err());
    }

    #[test]
    fn assignment_rows_normalize() {
        let a = Assignment::from_log_weights(&[-1000.0, -1000.0, 0.0, -50.0], 2);
        assert!(a.row(0).iter().all(|g| (g - 0.5).abs() < 1e-12));
        assert_eq!(a.labels, vec![0, 0]);
        assert!((a.row(1).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
