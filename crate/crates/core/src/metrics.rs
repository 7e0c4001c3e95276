// SPDX-License-Identifier: Apache-2.0

//! Expected best improvement among `k` draws, estimated without bias from
//! `n ≥ k` samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub circuit: String,
    /// One entry per generated sample; failures count as 0.
    pub improvements: Vec<f64>,
}

impl SampleSet {
    pub fn new(circuit: impl Into<String>, improvements: Vec<f64>) -> Result<Self> {
        if improvements.is_empty() {
            return Err(Error::Domain("a sample set needs at least one sample".into()));
        }
        if let Some(bad) = improvements.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain(format!("improvement {bad} outside [0, 1]")));
        }
        Ok(SampleSet {
            circuit: circuit.into(),
            improvements,
        })
    }

    pub fn len(&self) -> usize {
        self.improvements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.improvements.is_empty()
    }
}

/// Weight of the `j`-th largest sample (1-based): `C(n−j, k−1) / C(n, k)`.
/// Built by the ratio `w₁ = k/n`, `w_{j+1} = w_j·(n−j−k+1)/(n−j)`.
pub fn order_weights(n: usize, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("k must lie in [1, {n}], got {k}")));
    }
    let mut w = Vec::with_capacity(n);
    let mut cur = k as f64 / n as f64;
    for j in 1..=n {
        w.push(cur);
        if j == n || n - j < k {
            cur = 0.0;
        } else {
            cur *= (n - j - k + 1) as f64 / (n - j) as f64;
        }
    }
    Ok(w)
}

pub fn impr_at_k(samples: &SampleSet, k: usize) -> Result<f64> {
    let n = samples.len();
    let w = order_weights(n, k)?;
    if k == 1 {
        return Ok(samples.improvements.iter().sum::<f64>() / n as f64);
    }
    let mut sorted = samples.improvements.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted.iter().zip(&w).map(|(x, w)| x * w).sum())
}

/// Unweighted mean of per-circuit estimates.
pub fn aggregate(circuits: &[SampleSet], k: usize) -> Result<f64> {
    if circuits.is_empty() {
        return Err(Error::Domain("no circuits to aggregate".into()));
    }
    let each = circuits
        .par_iter()
        .map(|c| impr_at_k(c, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(each.iter().sum::<f64>() / each.len() as f64)
}
