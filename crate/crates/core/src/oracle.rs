//! Brute-force references used to cross-check the engines. Nothing here
//! depends on the Fisher or estimator code.

use serde::{Deserialize, Serialize};

use crate::channels::FiniteChannel;
use crate::combin::ln_binom;
use crate::error::{Error, Result};
use crate::models::StatModel;

/// Joint law of (X, Y) for X ~ `input` pushed through a channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumeratedLaw {
    pub nx: usize,
    pub ny: usize,
    /// Row-major `nx × ny`.
    pub joint: Vec<f64>,
}

impl EnumeratedLaw {
    pub fn new(channel: &FiniteChannel, input: &[f64]) -> Result<Self> {
        if input.len() != channel.n_inputs() {
            return Err(Error::DimensionMismatch { expected: channel.n_inputs(), got: input.len() });
        }
        let (nx, ny) = (channel.n_inputs(), channel.n_outputs());
        let mut joint = vec![0.0; nx * ny];
        for x in 0..nx {
            for y in 0..ny {
                joint[x * ny + y] = input[x] * channel.prob(x, y);
            }
        }
        let law = EnumeratedLaw { nx, ny, joint };
        let total = law.total();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("joint law sums to {total}")));
        }
        Ok(law)
    }

    pub fn total(&self) -> f64 {
        self.joint.iter().sum()
    }

    pub fn input_marginal(&self) -> Vec<f64> {
        (0..self.nx).map(|x| self.joint[x * self.ny..(x + 1) * self.ny].iter().sum()).collect()
    }

    pub fn output_marginal(&self) -> Vec<f64> {
        (0..self.ny).map(|y| (0..self.nx).map(|x| self.joint[x * self.ny + y]).sum()).collect()
    }

    /// E[g(X, Y)].
    pub fn expect(&self, g: impl Fn(usize, usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for x in 0..self.nx {
            for y in 0..self.ny {
                let p = self.joint[x * self.ny + y];
                if p != 0.0 {
                    acc += p * g(x, y);
                }
            }
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMoments {
    /// P(i ∈ support(Y)) per coordinate.
    pub marginal: Vec<f64>,
    pub bias: Vec<f64>,
    pub mse: f64,
}

/// Exact moments of p̂_i = slope·T_i/n − intercept, where T_i counts the n
/// i.i.d. reports whose support contains i. T_i is binomial in the output
/// marginal, so no n-tuples are enumerated.
pub fn exact_affine_estimator_moments(
    channel: &FiniteChannel,
    input: &[f64],
    target: &[f64],
    slope: f64,
    intercept: f64,
    n: u64,
) -> Result<AffineMoments> {
    if n == 0 {
        return Err(Error::invalid("n must be ≥ 1"));
    }
    let law = EnumeratedLaw::new(channel, input)?;
    let fy = law.output_marginal();
    let d = target.len();
    let mut marginal = vec![0.0; d];
    for (y, s) in channel.output_supports().iter().enumerate() {
        for &i in s {
            if i >= d {
                return Err(Error::DimensionMismatch { expected: d, got: i + 1 });
            }
            marginal[i] += fy[y];
        }
    }
    let bias: Vec<f64> = marginal.iter().zip(target).map(|(q, t)| slope * q - intercept - t).collect();
    let mse = marginal
        .iter()
        .zip(&bias)
        .map(|(q, b)| slope * slope * q * (1.0 - q) / n as f64 + b * b)
        .sum();
    Ok(AffineMoments { marginal, bias, mse })
}

/// Exact squared errors of v̂ = slope·T/n − intercept with T ~ Bin(n, q), and
/// of the truncation max(v̂, floor), around `target`.
pub fn exact_truncated_mse(n: u64, q: f64, slope: f64, intercept: f64, floor: f64, target: f64) -> Result<(f64, f64)> {
    if n == 0 || !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("need n ≥ 1 and q ∈ [0,1], got n={n}, q={q}")));
    }
    let (mut raw, mut trunc) = (0.0, 0.0);
    for t in 0..=n {
        let p = binomial_pmf(n, t, q);
        if p == 0.0 {
            continue;
        }
        let v = slope * t as f64 / n as f64 - intercept;
        raw += p * (v - target).powi(2);
        trunc += p * (v.max(floor) - target).powi(2);
    }
    Ok((raw, trunc))
}

fn binomial_pmf(n: u64, t: u64, q: f64) -> f64 {
    if q == 0.0 {
        return (t == 0) as u8 as f64;
    }
    if q == 1.0 {
        return (t == n) as u8 as f64;
    }
    (ln_binom(n as usize, t as usize) + t as f64 * q.ln() + (n - t) as f64 * (1.0 - q).ln()).exp()
}

/// Σ_y f(y|θ) ‖∇_θ log f(y|θ)‖² with the gradient from central differences,
/// Richardson-extrapolated from steps h and h/2.
pub fn finite_diff_trace(model: &StatModel, channel: &FiniteChannel, theta: &[f64], step: f64) -> Result<f64> {
    if !model.is_finite() {
        return Err(Error::Unsupported("finite differences need a finite model".into()));
    }
    if !(step > 0.0) {
        return Err(Error::invalid("step must be positive"));
    }
    let out = |t: &[f64]| -> Result<Vec<f64>> { channel.push_forward(&model.pmf(t)?) };
    let shifted = |j: usize, h: f64| -> Vec<f64> {
        let mut t = theta.to_vec();
        t[j] += h;
        t
    };
    for j in 0..theta.len() {
        for h in [step, -step] {
            let t = shifted(j, h);
            if model.check_interior(&t).is_err() {
                return Err(Error::invalid(format!("θ[{j}] = {} is within the step {step} of the boundary", theta[j])));
            }
        }
    }
    let f0 = out(theta)?;
    let mut grads = vec![vec![0.0; theta.len()]; f0.len()];
    for j in 0..theta.len() {
        let central = |h: f64| -> Result<Vec<f64>> {
            let (fp, fm) = (out(&shifted(j, h))?, out(&shifted(j, -h))?);
            Ok(fp.iter().zip(&fm).map(|(a, b)| if *a > 0.0 && *b > 0.0 { (a.ln() - b.ln()) / (2.0 * h) } else { 0.0 }).collect())
        };
        let (dh, dh2) = (central(step)?, central(step / 2.0)?);
        for y in 0..f0.len() {
            grads[y][j] = (4.0 * dh2[y] - dh[y]) / 3.0;
        }
    }
    Ok(f0
        .iter()
        .zip(&grads)
        .filter(|(f, _)| **f >= 1e-300)
        .map(|(f, g)| f * g.iter().map(|v| v * v).sum::<f64>())
        .sum())
}
