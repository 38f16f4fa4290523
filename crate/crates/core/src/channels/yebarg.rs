use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_materializable, FiniteChannel};
use crate::combin::{binom, ln_binom, subsets};
use crate::error::{Error, Result};

/// Subset-selection mechanism: input category `i ∈ 0..d`, output a weight-`w`
/// subset of `0..d` with probability proportional to e^ε if it contains `i`
/// and to 1 otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YeBargChannel {
    d: usize,
    w: usize,
    eps: f64,
}

pub fn make_yebarg(d: usize, w: usize, eps: f64) -> Result<YeBargChannel> {
    if d < 2 {
        return Err(Error::invalid(format!("subset selection needs d ≥ 2, got {d}")));
    }
    if w == 0 || w >= d {
        return Err(Error::invalid(format!("subset size must satisfy 1 ≤ w ≤ d−1, got w={w}, d={d}")));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("ε must be finite and ≥ 0, got {eps}")));
    }
    Ok(YeBargChannel { d, w, eps })
}

/// Reusable buffers for the lazy sampler.
#[derive(Clone, Debug, Default)]
pub struct SubsetScratch {
    mark: Vec<bool>,
    out: Vec<usize>,
}

impl SubsetScratch {
    pub fn new(d: usize) -> Self {
        SubsetScratch { mark: vec![false; d], out: Vec::new() }
    }
}

impl YeBargChannel {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn output_alphabet_size(&self) -> f64 {
        binom(self.d, self.w)
    }

    /// P(i ∈ Y | X = i) = e^ε w / (e^ε w + d − w).
    pub fn include_prob(&self) -> f64 {
        let ew = self.eps.exp() * self.w as f64;
        ew / (ew + (self.d - self.w) as f64)
    }

    /// P(j ∈ Y | X = i) for j ≠ i.
    pub fn cross_prob(&self) -> f64 {
        let (d, w, e) = (self.d as f64, self.w as f64, self.eps.exp());
        w * (e * w - e + d - w) / ((d - 1.0) * (e * w + d - w))
    }

    /// Kernel entry for an output containing (resp. not containing) the input.
    pub fn kernel_values(&self) -> (f64, f64) {
        // 1 / (e^ε C(d−1,w−1) + C(d−1,w)), in log space for large alphabets
        let (a, b) = (self.eps + ln_binom(self.d - 1, self.w - 1), ln_binom(self.d - 1, self.w));
        let m = a.max(b);
        let ln_den = m + ((a - m).exp() + (b - m).exp()).ln();
        ((self.eps - ln_den).exp(), (-ln_den).exp())
    }

    /// Draws a report for input `x`; returns the selected coordinates, sorted.
    pub fn sample_into<'a, R: Rng + ?Sized>(&self, x: usize, rng: &mut R, scratch: &'a mut SubsetScratch) -> &'a [usize] {
        debug_assert!(x < self.d);
        if scratch.mark.len() != self.d {
            scratch.mark = vec![false; self.d];
        }
        scratch.out.clear();
        let include = rng.random::<f64>() < self.include_prob();
        let m = if include { self.w - 1 } else { self.w };
        // Floyd's algorithm over the d−1 coordinates other than x
        let n = self.d - 1;
        for j in n - m..n {
            let t = rng.random_range(0..=j);
            let pick = if scratch.mark[skip(t, x)] { j } else { t };
            let c = skip(pick, x);
            scratch.mark[c] = true;
            scratch.out.push(c);
        }
        if include {
            scratch.out.push(x);
        }
        for &c in &scratch.out {
            scratch.mark[c] = false;
        }
        scratch.out.sort_unstable();
        &scratch.out
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> Vec<usize> {
        let mut scratch = SubsetScratch::new(self.d);
        self.sample_into(x, rng, &mut scratch).to_vec()
    }

    /// Materialized kernel over the C(d, w) subsets in lexicographic order.
    pub fn materialize(&self) -> Result<FiniteChannel> {
        check_materializable(self.d as f64, self.output_alphabet_size())?;
        let supports: Vec<Vec<usize>> = subsets(self.d, self.w).collect();
        let (hi, lo) = self.kernel_values();
        let ny = supports.len();
        let mut kernel = vec![lo; self.d * ny];
        for (y, s) in supports.iter().enumerate() {
            for &i in s {
                kernel[i * ny + y] = hi;
            }
        }
        FiniteChannel::from_flat(self.d, ny, kernel, self.eps, Some(supports))
    }
}

#[inline]
fn skip(j: usize, x: usize) -> usize {
    if j >= x {
        j + 1
    } else {
        j
    }
}
