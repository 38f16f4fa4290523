use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_materializable, FiniteChannel};
use crate::combin::{binom, binom_cumsum, ln_binom, subsets};
use crate::error::{Error, Result};
use crate::models::MAX_ENUMERABLE_BERNOULLI_DIM;

/// Keeps a binary vector if it has at most `k` ones, otherwise keeps `k` of its
/// ones chosen uniformly. Returns the subsampled vector and
/// R = max(‖x‖₁, k)/k.
pub fn subsample<R: Rng + ?Sized>(x: &[u8], k: usize, rng: &mut R) -> (Vec<u8>, f64) {
    let support: Vec<usize> = x.iter().enumerate().filter(|(_, &b)| b != 0).map(|(i, _)| i).collect();
    let (kept, r) = subsample_support(&support, k, rng);
    let mut out = vec![0u8; x.len()];
    for i in kept {
        out[i] = 1;
    }
    (out, r)
}

/// [`subsample`] on the sorted support of the input.
pub fn subsample_support<R: Rng + ?Sized>(support: &[usize], k: usize, rng: &mut R) -> (Vec<usize>, f64) {
    assert!(k >= 1, "subsampling level must be ≥ 1");
    let ones = support.len();
    if ones <= k {
        return (support.to_vec(), 1.0);
    }
    let mut kept: Vec<usize> = index::sample(rng, ones, k).into_iter().map(|j| support[j]).collect();
    kept.sort_unstable();
    (kept, ones as f64 / k as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsampleLevel {
    pub k: usize,
    /// N = Σ_{i ≤ k} C(d, i), the number of ≤k-sparse vectors.
    pub n_symbols: f64,
    /// Probability that the k-RR stage reports a symbol other than its input.
    pub p_e: f64,
}

fn ln_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn error_prob(n_symbols: f64, eps: f64) -> f64 {
    if n_symbols <= 1.0 {
        return 0.0;
    }
    1.0 / (1.0 + (eps - (n_symbols - 1.0).ln()).exp())
}

/// Largest k with Σ_{i ≤ k} C(d, i) ≤ exp(ε − slack·ln d).
pub fn select_k(d: usize, eps: f64, slack: f64) -> Result<SubsampleLevel> {
    if d < 1 || !(eps > 0.0) || !(slack >= 0.0) {
        return Err(Error::invalid(format!("select_k needs d ≥ 1, ε > 0, slack ≥ 0 (d={d}, ε={eps}, slack={slack})")));
    }
    let budget = eps - slack * (d as f64).ln();
    let mut ln_cum = f64::NEG_INFINITY;
    let mut k = None;
    for i in 0..=d {
        ln_cum = ln_add(ln_cum, ln_binom(d, i));
        if ln_cum > budget {
            break;
        }
        k = Some(i);
    }
    match k {
        Some(k) if k >= 1 => {
            let n_symbols = binom_cumsum(d, k);
            Ok(SubsampleLevel { k, n_symbols, p_e: error_prob(n_symbols, eps) })
        }
        _ => Err(Error::InfeasiblePrivacy(format!(
            "ε = {eps} leaves ln budget {budget:.3} after slack {slack}·ln {d}; need at least ln(1+d) = {:.3}",
            ((1 + d) as f64).ln()
        ))),
    }
}

/// Constants with P(Y(i) = 1 | X̃) = A·X̃(i) + B under k-RR over the N
/// ≤k-sparse vectors: A = 1 − p_e·N/(N−1), B = p_e·M/(N−1), where
/// M = Σ_{j<k} C(d−1, j) counts the symbols that contain a given coordinate.
pub fn compute_ab(d: usize, k: usize, eps: f64) -> Result<(f64, f64)> {
    if k < 1 || k > d {
        return Err(Error::invalid(format!("need 1 ≤ k ≤ d, got k={k}, d={d}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!("ε must be ≥ 0, got {eps}")));
    }
    let n = binom_cumsum(d, k);
    let m = binom_cumsum(d - 1, k - 1);
    let p_e = error_prob(n, eps);
    Ok((1.0 - p_e * n / (n - 1.0), p_e * m / (n - 1.0)))
}

/// All ≤k-sparse subsets of `0..d`, by weight and then lexicographically.
pub fn sparse_symbols(d: usize, k: usize) -> Vec<Vec<usize>> {
    (0..=k.min(d)).flat_map(|w| subsets(d, w)).collect()
}

/// Subsampling to ≤k ones followed by N-ary randomized response over the
/// ≤k-sparse vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsampleKrrChannel {
    d: usize,
    k: usize,
    eps: f64,
    slack: Option<f64>,
    n_symbols: f64,
    p_e: f64,
    a: f64,
    b: f64,
}

pub fn make_subsample_krr(d: usize, eps: f64, slack: f64) -> Result<SubsampleKrrChannel> {
    let level = select_k(d, eps, slack)?;
    let mut ch = SubsampleKrrChannel::with_k(d, level.k, eps)?;
    ch.slack = Some(slack);
    Ok(ch)
}

impl SubsampleKrrChannel {
    /// Channel at an explicit subsampling level.
    pub fn with_k(d: usize, k: usize, eps: f64) -> Result<Self> {
        if !eps.is_finite() {
            return Err(Error::invalid("ε must be finite"));
        }
        let (a, b) = compute_ab(d, k, eps)?;
        let n_symbols = binom_cumsum(d, k);
        Ok(SubsampleKrrChannel { d, k, eps, slack: None, n_symbols, p_e: error_prob(n_symbols, eps), a, b })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn slack(&self) -> Option<f64> {
        self.slack
    }

    pub fn n_symbols(&self) -> f64 {
        self.n_symbols
    }

    pub fn p_e(&self) -> f64 {
        self.p_e
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn level(&self) -> SubsampleLevel {
        SubsampleLevel { k: self.k, n_symbols: self.n_symbols, p_e: self.p_e }
    }

    /// Randomized response over ≤k-sparse supports: keep `x` with probability
    /// 1 − p_e, otherwise report a uniformly chosen different symbol.
    pub fn privatize<R: Rng + ?Sized>(&self, x: &[usize], rng: &mut R) -> Vec<usize> {
        debug_assert!(x.len() <= self.k);
        if rng.random::<f64>() >= self.p_e {
            return x.to_vec();
        }
        loop {
            // uniform over all N symbols: weight ∝ C(d, w), then a uniform subset
            let mut u = rng.random::<f64>() * self.n_symbols;
            let mut w = self.k;
            for i in 0..=self.k {
                let c = binom(self.d, i);
                if u < c {
                    w = i;
                    break;
                }
                u -= c;
            }
            let mut y: Vec<usize> = index::sample(rng, self.d, w).into_iter().collect();
            y.sort_unstable();
            if y != x {
                return y;
            }
        }
    }

    /// Full mechanism on the support of a binary vector. Returns the reported
    /// support and the subsampling ratio R.
    pub fn sample<R: Rng + ?Sized>(&self, support: &[usize], rng: &mut R) -> (Vec<usize>, f64) {
        let (kept, r) = subsample_support(support, self.k, rng);
        (self.privatize(&kept, rng), r)
    }

    /// Kernel of the subsampling step alone, from {0,1}^d (bit j of the input
    /// index is coordinate j) to the ≤k-sparse symbols. Not private (ε = ∞).
    pub fn subsample_kernel(&self) -> Result<FiniteChannel> {
        let nx = self.enumerable_inputs()?;
        let symbols = sparse_symbols(self.d, self.k);
        let ny = symbols.len();
        let mut kernel = vec![0.0; nx * ny];
        for x in 0..nx {
            let ones = x.count_ones() as usize;
            let p = if ones <= self.k { 1.0 } else { 1.0 / binom(ones, self.k) };
            for (y, s) in symbols.iter().enumerate() {
                let mask: usize = s.iter().map(|&i| 1usize << i).sum();
                let hit = if ones <= self.k { mask == x } else { s.len() == self.k && mask & x == mask };
                if hit {
                    kernel[x * ny + y] = p;
                }
            }
        }
        FiniteChannel::from_flat(nx, ny, kernel, f64::INFINITY, Some(symbols))
    }

    /// The N-ary randomized response stage over the ≤k-sparse symbols.
    pub fn krr_kernel(&self) -> Result<FiniteChannel> {
        let ny = self.n_symbols as usize;
        check_materializable(ny as f64, ny as f64)?;
        let keep = 1.0 - self.p_e;
        let flip = self.p_e / (self.n_symbols - 1.0);
        let mut kernel = vec![flip; ny * ny];
        for i in 0..ny {
            kernel[i * ny + i] = keep;
        }
        FiniteChannel::from_flat(ny, ny, kernel, self.eps, Some(sparse_symbols(self.d, self.k)))
    }

    /// Composite kernel from {0,1}^d to the ≤k-sparse symbols.
    pub fn materialize(&self) -> Result<FiniteChannel> {
        let nx = self.enumerable_inputs()?;
        check_materializable(nx as f64, self.n_symbols)?;
        self.subsample_kernel()?.compose(&self.krr_kernel()?)
    }

    fn enumerable_inputs(&self) -> Result<usize> {
        if self.d > MAX_ENUMERABLE_BERNOULLI_DIM {
            return Err(Error::CapExceeded { size: 2f64.powi(self.d as i32), cap: 1 << MAX_ENUMERABLE_BERNOULLI_DIM });
        }
        Ok(1usize << self.d)
    }
}
