use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sparse::{rr_invert, sparse_bernoulli_estimate, SparsePipelineConfig};
use crate::channels::make_binary_rr;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoPhaseConfig {
    /// Fraction of nodes spent on the coarse per-coordinate estimates.
    pub phase1_fraction: f64,
    /// Upper limit on the coarse-estimate sum within a group.
    pub group_cap: f64,
    pub pipeline: SparsePipelineConfig,
}

impl Default for TwoPhaseConfig {
    fn default() -> Self {
        TwoPhaseConfig { phase1_fraction: 0.5, group_cap: 2.0, pipeline: SparsePipelineConfig::default() }
    }
}

impl TwoPhaseConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.phase1_fraction > 0.0 && self.phase1_fraction < 1.0) {
            return Err(Error::Config(format!("phase-1 fraction must lie in (0, 1), got {}", self.phase1_fraction)));
        }
        if !(self.group_cap >= 1.0 + 1.0 / d as f64) {
            return Err(Error::Config(format!("group cap {} is below 1 + 1/d", self.group_cap)));
        }
        self.pipeline.validate()
    }
}

/// First-fit-decreasing packing of indices so that every group's sum is at
/// most `cap`. Negative entries count as zero.
pub fn group_params(theta_hat: &[f64], cap: f64) -> Result<Vec<Vec<usize>>> {
    if let Some((index, &value)) = theta_hat.iter().enumerate().find(|(_, v)| **v > cap) {
        return Err(Error::ExceedsCap { index, value, cap });
    }
    let mut order: Vec<usize> = (0..theta_hat.len()).collect();
    order.sort_by(|&a, &b| theta_hat[b].max(0.0).total_cmp(&theta_hat[a].max(0.0)).then(a.cmp(&b)));
    let mut groups: Vec<(Vec<usize>, f64)> = Vec::new();
    for i in order {
        let v = theta_hat[i].max(0.0);
        match groups.iter_mut().find(|(_, sum)| *sum + v <= cap) {
            Some((g, sum)) => {
                g.push(i);
                *sum += v;
            }
            None => groups.push((vec![i], v)),
        }
    }
    Ok(groups.into_iter().map(|(g, _)| g).collect())
}

/// Largest-remainder apportionment of `total` in proportion to `weights`.
pub fn largest_remainder(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|&w| total as f64 * w as f64 / sum as f64).collect();
    let mut seats: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = total - seats.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    for i in order {
        if left == 0 {
            break;
        }
        seats[i] += 1;
        left -= 1;
    }
    seats
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseEstimate {
    pub theta: Vec<f64>,
    pub coarse: Vec<f64>,
    pub groups: Vec<Vec<usize>>,
    /// Coordinates whose coarse estimate exceeded the cap and were split off.
    pub singletons: Vec<usize>,
}

impl TwoPhaseEstimate {
    /// Whether some coarse estimate missed θ by 1/d or more.
    pub fn phase1_failed(&self, theta: &[f64]) -> bool {
        let d = theta.len() as f64;
        self.coarse.iter().zip(theta).any(|(c, t)| (c - t).abs() >= 1.0 / d)
    }
}

/// Two-phase s-sparse estimator. Phase 1 spends a fraction of the nodes on
/// per-coordinate binary randomized response (node k reports coordinate
/// k mod d); the coarse estimates are packed into groups of bounded mass.
/// Phase 2 apportions the remaining nodes to groups in proportion to group
/// size, and each group runs the sparse pipeline on its coordinates.
pub fn s_sparse_two_phase_estimate<R: Rng + ?Sized>(
    data: &[Vec<usize>],
    d: usize,
    eps: f64,
    cfg: &TwoPhaseConfig,
    rng: &mut R,
) -> Result<TwoPhaseEstimate> {
    cfg.validate(d)?;
    let n = data.len();
    let n1 = (n as f64 * cfg.phase1_fraction).round() as usize;
    if n1 < d || n - n1 < 2 * d {
        return Err(Error::invalid(format!("n = {n} is too small for d = {d}")));
    }
    let rr = make_binary_rr(eps)?;
    let mut ones = vec![0u64; d];
    let mut seen = vec![0u64; d];
    for (k, x) in data[..n1].iter().enumerate() {
        let j = k % d;
        ones[j] += rr.sample(x.contains(&j) as usize, rng) as u64;
        seen[j] += 1;
    }
    let coarse = (0..d).map(|j| rr_invert(ones[j], seen[j], eps)).collect::<Result<Vec<_>>>()?;

    let singletons: Vec<usize> = (0..d).filter(|&j| coarse[j] > cfg.group_cap).collect();
    let capped: Vec<f64> = coarse.iter().map(|&c| if c > cfg.group_cap { 0.0 } else { c }).collect();
    let mut groups: Vec<Vec<usize>> = group_params(&capped, cfg.group_cap)?
        .into_iter()
        .map(|g| g.into_iter().filter(|j| !singletons.contains(j)).collect::<Vec<_>>())
        .filter(|g| !g.is_empty())
        .collect();
    groups.extend(singletons.iter().map(|&j| vec![j]));
    for g in groups.iter_mut() {
        g.sort_unstable();
    }

    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let alloc = largest_remainder(n - n1, &sizes);
    let mut theta = vec![0.0; d];
    let mut start = n1;
    let mut local = vec![usize::MAX; d];
    let mut sub: Vec<Vec<usize>> = Vec::new();
    for (g, &m) in groups.iter().zip(&alloc) {
        for (pos, &j) in g.iter().enumerate() {
            local[j] = pos;
        }
        sub.clear();
        sub.extend(data[start..start + m].iter().map(|x| {
            x.iter().filter(|&&j| local[j] != usize::MAX).map(|&j| local[j]).collect()
        }));
        let est = sparse_bernoulli_estimate(&sub, g.len(), eps, &cfg.pipeline, rng)?;
        for (pos, &j) in g.iter().enumerate() {
            theta[j] = est.theta[pos];
            local[j] = usize::MAX;
        }
        start += m;
    }
    Ok(TwoPhaseEstimate { theta, coarse, groups, singletons })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sample_bits_into;
    use crate::rng::seeded;

    #[test]
    fn ffd_example() {
        let g = group_params(&[0.9, 0.8, 0.7, 0.5, 0.1], 2.0).unwrap();
        // 0.1 still fits beside 0.9 and 0.8
        assert_eq!(g, vec![vec![0, 1, 4], vec![2, 3]]);
        assert_eq!(group_params(&[0.4], 2.0).unwrap(), vec![vec![0]]);
        assert_eq!(group_params(&[0.0; 4], 2.0).unwrap(), vec![vec![0, 1, 2, 3]]);
        assert!(matches!(group_params(&[0.5, 2.5], 2.0), Err(Error::ExceedsCap { index: 1, .. })));
    }

    #[test]
    fn apportionment() {
        assert_eq!(largest_remainder(10, &[1, 1, 1]), vec![4, 3, 3]);
        assert_eq!(largest_remainder(7, &[2, 5]), vec![2, 5]);
        assert_eq!(largest_remainder(100, &[3, 5]).iter().sum::<usize>(), 100);
    }

    #[test]
    fn two_phase_runs() {
        let (d, s, eps, n) = (8, 2.0, 1.0, 100_000);
        let theta = vec![s / (2.0 * d as f64); d];
        let mut rng = seeded(21);
        let mut bits = vec![0u8; d];
        let data: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                sample_bits_into(&theta, &mut rng, &mut bits);
                (0..d).filter(|&j| bits[j] == 1).collect()
            })
            .collect();
        let est = s_sparse_two_phase_estimate(&data, d, eps, &TwoPhaseConfig::default(), &mut rng).unwrap();
        assert!(!est.phase1_failed(&theta));
        let mut covered: Vec<usize> = est.groups.concat();
        covered.sort_unstable();
        assert_eq!(covered, (0..d).collect::<Vec<_>>());
        for g in &est.groups {
            assert!(g.iter().map(|&j| theta[j]).sum::<f64>() <= 3.0);
        }
        let err: f64 = est.theta.iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(err < 0.05, "err {err}");
    }
}
