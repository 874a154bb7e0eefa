//! Model selection criteria and partition agreement.
//!
//! AIC and BIC use the penalty-positive convention: lower is better.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `2d − 2 log L`.
pub fn aic(total_loglik: f64, d: usize) -> f64 {
    2.0 * d as f64 - 2.0 * total_loglik
}

/// `d ln n − 2 log L`.
pub fn bic(total_loglik: f64, d: usize, n: usize) -> f64 {
    d as f64 * (n as f64).ln() - 2.0 * total_loglik
}

fn choose2(x: u64) -> u128 {
    let x = x as u128;
    x * x.saturating_sub(1) / 2
}

/// Adjusted Rand index of two labelings of the same points.
///
/// Pair counts are exact integers; only the final ratio is floating point.
/// Two trivial partitions (both a single cluster, or both all singletons)
/// score 1.
pub fn ari<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + std::hash::Hash,
    B: Eq + std::hash::Hash,
{
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut cells: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: u128 = cells.values().map(|&c| choose2(c)).sum();
    let sum_a: u128 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: u128 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(a.len() as u64);
    // ARI = (index - sa·sb/T) / ((sa + sb)/2 - sa·sb/T), scaled by 2T
    let num = 2 * total as i128 * index as i128 - 2 * (sum_a * sum_b) as i128;
    let den = total as i128 * (sum_a + sum_b) as i128 - 2 * (sum_a * sum_b) as i128;
    if den == 0 {
        return Ok(if num == 0 { 1.0 } else { 0.0 });
    }
    Ok(num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total_loglik: f64,
    pub aic: f64,
    pub bic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ari: Option<f64>,
    pub n: usize,
    pub d: usize,
}

impl EvalReport {
    pub fn new(total_loglik: f64, d: usize, n: usize, ari: Option<f64>) -> EvalReport {
        EvalReport {
            total_loglik,
            aic: aic(total_loglik, d),
            bic: bic(total_loglik, d, n),
            ari,
            n,
            d,
        }
    }
}
