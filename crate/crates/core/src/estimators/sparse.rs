use rand::Rng;
use serde::{Deserialize, Serialize};

use super::yebarg::{choose_w, yebarg_tally, AffineEstimatorSpec};
use crate::channels::{make_binary_rr, make_yebarg};
use crate::error::{Error, Result};

/// Lower truncation for the estimate of P_S = Π(1 − θ_j):
/// (1 − 1/√2) / exp(1 − 1/√2).
pub fn ps_floor() -> f64 {
    let a = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
    a / a.exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparsePipelineConfig {
    /// Spread each coordinate over two slots before reduction.
    pub halving: bool,
    /// Fraction of nodes reporting the category map; the rest report the
    /// all-zero indicator.
    pub split: f64,
    pub ps_floor: f64,
}

impl Default for SparsePipelineConfig {
    fn default() -> Self {
        SparsePipelineConfig { halving: true, split: 0.5, ps_floor: ps_floor() }
    }
}

impl SparsePipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split must lie in (0, 1), got {}", self.split)));
        }
        if !(self.ps_floor > 0.0 && self.ps_floor < 1.0) {
            return Err(Error::Config(format!("P_S floor must lie in (0, 1), got {}", self.ps_floor)));
        }
        Ok(())
    }
}

/// Category of a binary vector given by its support: i if the support is
/// {i}, d otherwise.
pub fn f_map(support: &[usize], d: usize) -> usize {
    match support {
        [i] => *i,
        _ => d,
    }
}

/// 1 if the vector is all zeros.
pub fn g_map(support: &[usize]) -> usize {
    support.is_empty() as usize
}

/// Moves each one of coordinate i to slot 2i or 2i+1, uniformly. Each slot
/// then has marginal θ_i/2; the two slots of a coordinate are never both set.
pub fn halve<R: Rng + ?Sized>(support: &[usize], rng: &mut R, out: &mut Vec<usize>) {
    out.clear();
    out.extend(support.iter().map(|&i| 2 * i + rng.random::<bool>() as usize));
}

/// p_i = θ_i Π_{j≠i}(1 − θ_j) and P_S = Π_j(1 − θ_j).
pub fn reduction_probs(theta: &[f64]) -> (Vec<f64>, f64) {
    let ps: f64 = theta.iter().map(|t| 1.0 - t).product();
    let p = theta
        .iter()
        .enumerate()
        .map(|(i, &t)| t * theta.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, u)| 1.0 - u).product::<f64>())
        .collect();
    (p, ps)
}

/// θ_i = p_i / (p_i + P_S).
pub fn combine(p: &[f64], ps: f64) -> Vec<f64> {
    p.iter().map(|&pi| if pi + ps > 0.0 { pi / (pi + ps) } else { 0.0 }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseEstimate {
    pub theta: Vec<f64>,
    /// Truncated p̂* per original coordinate (slot pairs summed under halving).
    pub p_hat: Vec<f64>,
    pub ps_hat: f64,
}

/// Sparse Bernoulli estimator through the reduction to distribution
/// estimation. `data` holds each node's support; the first `split` fraction
/// report f(X) with the subset mechanism on d+1 (or 2d+1 when halving)
/// categories, the rest report g(X) with binary randomized response.
pub fn sparse_bernoulli_estimate<R: Rng + ?Sized>(
    data: &[Vec<usize>],
    d: usize,
    eps: f64,
    cfg: &SparsePipelineConfig,
    rng: &mut R,
) -> Result<SparseEstimate> {
    cfg.validate()?;
    if d == 0 {
        return Err(Error::invalid("sparse pipeline needs d ≥ 1"));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::EmptyReports);
    }
    let n1 = ((n as f64 * cfg.split).round() as usize).clamp(1, n - 1);
    let slots = if cfg.halving { 2 * d } else { d };
    let cats = slots + 1;
    let w = choose_w(cats, eps);
    let ch = make_yebarg(cats, w, eps)?;
    let mut buf = Vec::new();
    let categories: Vec<usize> = data[..n1]
        .iter()
        .map(|x| {
            if cfg.halving {
                halve(x, rng, &mut buf);
                f_map(&buf, slots)
            } else {
                f_map(x, slots)
            }
        })
        .collect();
    let tally = yebarg_tally(&ch, categories, rng);
    let p_slot = AffineEstimatorSpec::yebarg(cats, w, eps)?.apply(&tally.counts, tally.n)?;
    let p_hat: Vec<f64> = if cfg.halving {
        (0..d).map(|i| (p_slot[2 * i] + p_slot[2 * i + 1]).max(0.0)).collect()
    } else {
        p_slot[..d].iter().map(|p| p.max(0.0)).collect()
    };

    let rr = make_binary_rr(eps)?;
    let mut ones = 0u64;
    for x in &data[n1..] {
        ones += rr.sample(g_map(x), rng) as u64;
    }
    let m = (n - n1) as u64;
    let ps_raw = rr_invert(ones, m, eps)?;
    let ps_hat = ps_raw.max(cfg.ps_floor);
    Ok(SparseEstimate { theta: combine(&p_hat, ps_hat), p_hat, ps_hat })
}

/// Unbiased estimate of P(X = 1) from `ones` of `m` binary-RR reports.
pub fn rr_invert(ones: u64, m: u64, eps: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::EmptyReports);
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("ε = 0 reports carry no information to invert"));
    }
    let e = eps.exp();
    Ok((ones as f64 / m as f64 - 1.0 / (e + 1.0)) * (e + 1.0) / (e - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sample_bits_into;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    #[test]
    fn floor_constant() {
        let a = 1.0 - 0.5f64.sqrt();
        assert!((ps_floor() - a * (-a).exp()).abs() < 1e-15);
        assert!((ps_floor() - 0.21850).abs() < 1e-4);
        assert_eq!(SparsePipelineConfig::default().ps_floor, ps_floor());
    }

    #[test]
    fn reduction_identities() {
        let (p, ps) = reduction_probs(&[0.3, 0.2]);
        assert_relative_eq!(p[0], 0.24, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.14, epsilon = 1e-15);
        assert_relative_eq!(ps, 0.56, epsilon = 1e-15);
        let back = combine(&p, ps);
        assert_relative_eq!(back[0], 0.3, epsilon = 1e-15);
        assert_relative_eq!(back[1], 0.2, epsilon = 1e-15);
        let (p, ps) = reduction_probs(&[0.0; 4]);
        assert_eq!((p, ps), (vec![0.0; 4], 1.0));
    }

    #[test]
    fn maps() {
        assert_eq!(f_map(&[2], 5), 2);
        assert_eq!(f_map(&[], 5), 5);
        assert_eq!(f_map(&[1, 3], 5), 5);
        assert_eq!(g_map(&[]), 1);
        assert_eq!(g_map(&[0]), 0);
    }

    #[test]
    fn halved_pairs_recover_theta() {
        // category probabilities after halving, summed over the slot pair
        let theta = [0.3, 0.2, 0.45];
        let (p, ps) = reduction_probs(&theta);
        let mut rng = seeded(4);
        let n = 400_000;
        let mut counts = [0u64; 7];
        let (mut bits, mut sup, mut buf) = (vec![0u8; 3], Vec::new(), Vec::new());
        for _ in 0..n {
            sample_bits_into(&theta, &mut rng, &mut bits);
            sup.clear();
            sup.extend((0..3).filter(|&j| bits[j] == 1));
            halve(&sup, &mut rng, &mut buf);
            counts[f_map(&buf, 6)] += 1;
        }
        for i in 0..3 {
            let freq = (counts[2 * i] + counts[2 * i + 1]) as f64 / n as f64;
            let se = (p[i] * (1.0 - p[i]) / n as f64).sqrt();
            assert!((freq - p[i]).abs() < 4.0 * se);
        }
        assert_relative_eq!(combine(&p, ps)[2], 0.45, epsilon = 1e-15);
    }

    #[test]
    fn zero_theta_goes_to_zero() {
        let mut rng = seeded(8);
        let data = vec![Vec::new(); 100_000];
        let est = sparse_bernoulli_estimate(&data, 4, 2.0, &SparsePipelineConfig::default(), &mut rng).unwrap();
        assert!(est.theta.iter().all(|t| *t >= 0.0 && *t < 0.05));
        assert!(est.ps_hat >= ps_floor());
    }

    #[test]
    fn rejects_bad_split() {
        let cfg = SparsePipelineConfig { split: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
