use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{make_krr, select_k, SubsampleKrrChannel};
use crate::error::{Error, Result};

/// How the subsampling scale is estimated from the private ‖X‖₁ histogram.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RScale {
    /// μ̂ = Ê[R] with R = max(‖X‖₁, k)/k. E[R]·E[X̃_i] differs from θ_i
    /// whenever R varies.
    MeanR,
    /// μ̂ = Ê‖X‖₁ / Ê[min(‖X‖₁, k)]. Exact for exchangeable θ, and makes
    /// Σθ̂ unbiased in general.
    #[default]
    RatioOfMeans,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsampleAggregatorState {
    pub a: f64,
    pub b: f64,
    pub mu_r: f64,
    /// Nodes spent on estimating μ_R.
    pub m: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuREstimate {
    /// Unbiased (possibly negative) estimate of the pmf of ‖X‖₁ on 0..=d.
    pub pmf: Vec<f64>,
    /// Σ_v max(v,k)/k · pmf(v), before clamping.
    pub mean_r: f64,
    /// Σ_v v·pmf(v) / Σ_v min(v,k)·pmf(v), before clamping.
    pub ratio: f64,
}

impl MuREstimate {
    pub fn scale(&self, kind: RScale) -> f64 {
        let v = match kind {
            RScale::MeanR => self.mean_r,
            RScale::RatioOfMeans => self.ratio,
        };
        if v.is_finite() {
            v.max(1.0)
        } else {
            1.0
        }
    }
}

/// Estimates the ‖X‖₁ distribution from counts of (d+1)-ary k-RR reports of
/// ‖X‖₁ and derives the scale candidates.
pub fn estimate_mu_r(counts: &[u64], d: usize, k: usize, eps: f64) -> Result<MuREstimate> {
    if k == 0 {
        return Err(Error::invalid("subsampling level must be ≥ 1"));
    }
    let pmf = make_krr(d + 1, eps)?.invert_frequencies(counts)?;
    Ok(mu_r_from_pmf(pmf, k))
}

pub fn mu_r_from_pmf(pmf: Vec<f64>, k: usize) -> MuREstimate {
    let kf = k as f64;
    let mean_r = pmf.iter().enumerate().map(|(v, p)| (v as f64).max(kf) / kf * p).sum();
    let num: f64 = pmf.iter().enumerate().map(|(v, p)| v as f64 * p).sum();
    let den: f64 = pmf.iter().enumerate().map(|(v, p)| (v as f64).min(kf) * p).sum();
    MuREstimate { pmf, mean_r, ratio: if den > 0.0 { num / den } else { 1.0 } }
}

/// θ̂_i = (1/n) Σ_k μ̂_R (Y_k(i) − B)/A.
pub fn subsample_krr_estimate(reports: &[Vec<usize>], d: usize, state: &SubsampleAggregatorState) -> Result<Vec<f64>> {
    if reports.is_empty() {
        return Err(Error::EmptyReports);
    }
    let mut counts = vec![0u64; d];
    for r in reports {
        for &i in r {
            if i >= d {
                return Err(Error::DimensionMismatch { expected: d, got: i + 1 });
            }
            counts[i] += 1;
        }
    }
    let n = reports.len() as f64;
    Ok(counts.iter().map(|&c| state.mu_r * (c as f64 / n - state.b) / state.a).collect())
}

/// Aggregator with each node's own R: θ̂_i = (1/n) Σ_k R_k (Y_k(i) − B)/A.
/// Exactly unbiased, since E[R·X̃(i)] = θ_i. R is not a private quantity, so
/// this form only serves as a reference.
pub fn subsample_krr_estimate_known_r(reports: &[(Vec<usize>, f64)], d: usize, a: f64, b: f64) -> Result<Vec<f64>> {
    if reports.is_empty() {
        return Err(Error::EmptyReports);
    }
    let mut theta = vec![0.0; d];
    let mut r_sum = 0.0;
    for (y, r) in reports {
        r_sum += r;
        for &i in y {
            if i >= d {
                return Err(Error::DimensionMismatch { expected: d, got: i + 1 });
            }
            theta[i] += r;
        }
    }
    let n = reports.len() as f64;
    Ok(theta.iter().map(|t| (t / n - b * r_sum / n) / a).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsampleConfig {
    /// Slack in the level selection; ignored when `k` is set.
    pub slack: f64,
    pub k: Option<usize>,
    /// Fraction of nodes spent on the ‖X‖₁ histogram.
    pub mu_fraction: f64,
    pub r_scale: RScale,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        SubsampleConfig { slack: 10.0, k: None, mu_fraction: 0.1, r_scale: RScale::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsampleEstimate {
    pub theta: Vec<f64>,
    pub k: usize,
    pub state: SubsampleAggregatorState,
    pub mu: MuREstimate,
}

impl SubsampleConfig {
    pub fn channel(&self, d: usize, eps: f64) -> Result<SubsampleKrrChannel> {
        let k = match self.k {
            Some(k) => k,
            None => select_k(d, eps, self.slack)?.k,
        };
        SubsampleKrrChannel::with_k(d, k, eps)
    }
}

/// Full subsample + k-RR protocol on node supports: the first ⌈mu_fraction·n⌉
/// nodes report ‖X‖₁ with (d+1)-ary k-RR, the rest report through the
/// subsample + k-RR channel.
pub fn subsample_krr_pipeline<R: Rng + ?Sized>(
    data: &[Vec<usize>],
    d: usize,
    eps: f64,
    cfg: &SubsampleConfig,
    rng: &mut R,
) -> Result<SubsampleEstimate> {
    if !(cfg.mu_fraction > 0.0 && cfg.mu_fraction < 1.0) {
        return Err(Error::Config(format!("mu_fraction must lie in (0, 1), got {}", cfg.mu_fraction)));
    }
    let ch = cfg.channel(d, eps)?;
    let n = data.len();
    let m = (n as f64 * cfg.mu_fraction).ceil() as usize;
    if m == 0 || m >= n {
        return Err(Error::EmptyReports);
    }
    let krr = make_krr(d + 1, eps)?;
    let mut hist = vec![0u64; d + 1];
    for x in &data[..m] {
        hist[krr.sample(x.len().min(d), rng)] += 1;
    }
    let mu = estimate_mu_r(&hist, d, ch.k(), eps)?;
    let reports: Vec<Vec<usize>> = data[m..].iter().map(|x| ch.sample(x, rng).0).collect();
    let state = SubsampleAggregatorState { a: ch.a(), b: ch.b(), mu_r: mu.scale(cfg.r_scale), m };
    let theta = subsample_krr_estimate(&reports, d, &state)?;
    Ok(SubsampleEstimate { theta, k: ch.k(), state, mu })
}
