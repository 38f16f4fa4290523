use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_materializable, FiniteChannel};
use crate::error::{Error, Result};

/// k-ary randomized response: keep the input with probability
/// e^ε/(k−1+e^ε), otherwise report one of the other k−1 symbols uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrrChannel {
    k: usize,
    eps: f64,
}

pub fn make_krr(k: usize, eps: f64) -> Result<KrrChannel> {
    if k < 2 {
        return Err(Error::invalid(format!("k-RR needs k ≥ 2, got {k}")));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("k-RR needs a finite ε ≥ 0, got {eps}")));
    }
    Ok(KrrChannel { k, eps })
}

/// Per-coordinate binary randomized response.
pub fn make_binary_rr(eps: f64) -> Result<KrrChannel> {
    make_krr(2, eps)
}

impl KrrChannel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Probability of reporting the true symbol.
    pub fn keep_prob(&self) -> f64 {
        let e = self.eps.exp();
        e / (self.k as f64 - 1.0 + e)
    }

    /// Probability of each particular wrong symbol.
    pub fn flip_prob(&self) -> f64 {
        1.0 / (self.k as f64 - 1.0 + self.eps.exp())
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        debug_assert!(x < self.k);
        if rng.random::<f64>() < self.keep_prob() {
            x
        } else {
            let r = rng.random_range(0..self.k - 1);
            if r >= x {
                r + 1
            } else {
                r
            }
        }
    }

    /// Unbiased inversion of observed symbol frequencies:
    /// E[freq_v] = q + (keep − q)·π_v.
    pub fn invert_frequencies(&self, counts: &[u64]) -> Result<Vec<f64>> {
        if counts.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: counts.len() });
        }
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptyReports);
        }
        let (keep, flip) = (self.keep_prob(), self.flip_prob());
        if keep - flip <= 0.0 {
            return Err(Error::invalid("ε = 0 k-RR carries no information to invert"));
        }
        Ok(counts
            .iter()
            .map(|&c| (c as f64 / n as f64 - flip) / (keep - flip))
            .collect())
    }

    pub fn materialize(&self) -> Result<FiniteChannel> {
        check_materializable(self.k as f64, self.k as f64)?;
        let (keep, flip) = (self.keep_prob(), self.flip_prob());
        let mut kernel = vec![flip; self.k * self.k];
        for i in 0..self.k {
            kernel[i * self.k + i] = keep;
        }
        FiniteChannel::from_flat(self.k, self.k, kernel, self.eps, None)
    }
}
