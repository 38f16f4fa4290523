//! ε-LDP privatization channels over finite alphabets.
//!
//! [`FiniteChannel`] is a materialized row-stochastic kernel `Q(y|x)` carrying
//! the privacy level it was constructed for. The structured mechanisms (k-RR,
//! Ye-Barg subset selection, subsample + k-RR) sample lazily and materialize
//! into a `FiniteChannel` when their alphabets are small enough.

mod krr;
mod subsample;
mod yebarg;

pub use krr::{make_binary_rr, make_krr, KrrChannel};
pub use subsample::{
    compute_ab, make_subsample_krr, select_k, sparse_symbols, subsample, subsample_support, SubsampleKrrChannel,
    SubsampleLevel,
};
pub use yebarg::{make_yebarg, SubsetScratch, YeBargChannel};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output alphabets larger than this are only available through lazy samplers.
pub const MATERIALIZATION_CAP: usize = 100_000;

/// Materialized kernels are additionally limited to this many entries.
pub const MAX_KERNEL_ENTRIES: usize = 20_000_000;

const ROW_SUM_TOL: f64 = 1e-12;

/// Row-stochastic kernel `Q(y|x)` with a certified privacy level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteChannel {
    n_inputs: usize,
    n_outputs: usize,
    /// Row-major `n_inputs × n_outputs`.
    kernel: Vec<f64>,
    eps_nominal: f64,
    /// Support set labelling each output symbol (e.g. the coordinates set in a
    /// binary report). Index-valued outputs are labelled `[y]`.
    output_supports: Vec<Vec<usize>>,
}

/// Minimal ε such that every column ratio max_x Q(y|x) / min_x Q(y|x) ≤ e^ε.
///
/// Returns `+∞` when a column mixes zero and nonzero entries.
pub fn validate_eps(rows: &[Vec<f64>]) -> Result<f64> {
    check_stochastic(rows)?;
    Ok(column_eps(rows.len(), rows[0].len(), |x, y| rows[x][y]))
}

fn check_stochastic(rows: &[Vec<f64>]) -> Result<()> {
    let ny = rows
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::NonStochastic("kernel has no rows".into()))?;
    if ny == 0 {
        return Err(Error::NonStochastic("kernel has no columns".into()));
    }
    for (x, row) in rows.iter().enumerate() {
        if row.len() != ny {
            return Err(Error::NonStochastic(format!("row {x} has {} entries, expected {ny}", row.len())));
        }
        if let Some(v) = row.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::NonStochastic(format!("row {x} has entry {v}")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NonStochastic(format!("row {x} sums to {sum}")));
        }
    }
    Ok(())
}

fn column_eps(nx: usize, ny: usize, q: impl Fn(usize, usize) -> f64) -> f64 {
    let mut eps: f64 = 0.0;
    for y in 0..ny {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for x in 0..nx {
            let v = q(x, y);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi == 0.0 {
            continue;
        }
        if lo == 0.0 {
            return f64::INFINITY;
        }
        eps = eps.max((hi / lo).ln());
    }
    eps
}

impl FiniteChannel {
    /// Builds a channel and certifies that its column ratios respect
    /// `eps_nominal`. All-zero columns are rejected; columns mixing zero and
    /// nonzero entries are only allowed when `eps_nominal` is infinite.
    pub fn new(rows: Vec<Vec<f64>>, eps_nominal: f64) -> Result<Self> {
        check_stochastic(&rows)?;
        let n_inputs = rows.len();
        let n_outputs = rows[0].len();
        let kernel: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_flat(n_inputs, n_outputs, kernel, eps_nominal, None)
    }

    pub(crate) fn from_flat(
        n_inputs: usize,
        n_outputs: usize,
        kernel: Vec<f64>,
        eps_nominal: f64,
        output_supports: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        if !(eps_nominal >= 0.0) {
            return Err(Error::invalid(format!("nominal ε must be ≥ 0, got {eps_nominal}")));
        }
        let output_supports = output_supports.unwrap_or_else(|| (0..n_outputs).map(|y| vec![y]).collect());
        if output_supports.len() != n_outputs {
            return Err(Error::DimensionMismatch { expected: n_outputs, got: output_supports.len() });
        }
        let ch = FiniteChannel { n_inputs, n_outputs, kernel, eps_nominal, output_supports };
        for y in 0..n_outputs {
            let col = (0..n_inputs).map(|x| ch.prob(x, y));
            let (zeros, total) = col.fold((0, 0), |(z, t), v| (z + (v == 0.0) as usize, t + 1));
            if zeros == total {
                return Err(Error::ZeroColumn { column: y });
            }
            if zeros > 0 && eps_nominal.is_finite() {
                return Err(Error::ZeroColumn { column: y });
            }
        }
        let certified = ch.eps_star();
        if eps_nominal.is_finite() && certified > eps_nominal + 1e-12 * eps_nominal.max(1.0) {
            return Err(Error::EpsViolation { certified, nominal: eps_nominal });
        }
        Ok(ch)
    }

    /// Lossless channel on `k` symbols (ε = ∞).
    pub fn identity(k: usize) -> Result<Self> {
        let mut kernel = vec![0.0; k * k];
        for i in 0..k {
            kernel[i * k + i] = 1.0;
        }
        Self::from_flat(k, k, kernel, f64::INFINITY, None)
    }

    /// Output independent of the input (ε = 0).
    pub fn uniform(n_inputs: usize, n_outputs: usize) -> Result<Self> {
        if n_inputs == 0 || n_outputs == 0 {
            return Err(Error::invalid("uniform channel needs nonempty alphabets"));
        }
        let kernel = vec![1.0 / n_outputs as f64; n_inputs * n_outputs];
        Self::from_flat(n_inputs, n_outputs, kernel, 0.0, None)
    }

    pub fn with_output_supports(mut self, supports: Vec<Vec<usize>>) -> Result<Self> {
        if supports.len() != self.n_outputs {
            return Err(Error::DimensionMismatch { expected: self.n_outputs, got: supports.len() });
        }
        self.output_supports = supports;
        Ok(self)
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn eps_nominal(&self) -> f64 {
        self.eps_nominal
    }

    pub fn output_supports(&self) -> &[Vec<usize>] {
        &self.output_supports
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.kernel[x * self.n_outputs + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.kernel[x * self.n_outputs..(x + 1) * self.n_outputs]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_inputs).map(|x| self.row(x).to_vec()).collect()
    }

    /// Certified ε* of the kernel (see [`validate_eps`]).
    pub fn eps_star(&self) -> f64 {
        column_eps(self.n_inputs, self.n_outputs, |x, y| self.prob(x, y))
    }

    /// Output distribution Σ_x Q(y|x) p(x).
    pub fn push_forward(&self, input_dist: &[f64]) -> Result<Vec<f64>> {
        if input_dist.len() != self.n_inputs {
            return Err(Error::DimensionMismatch { expected: self.n_inputs, got: input_dist.len() });
        }
        let sum: f64 = input_dist.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || input_dist.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invalid(format!("input distribution sums to {sum}")));
        }
        let mut out = vec![0.0; self.n_outputs];
        for (x, &p) in input_dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, q) in out.iter_mut().zip(self.row(x)) {
                *o += p * q;
            }
        }
        Ok(out)
    }

    /// Kernel of `self` followed by `next`. The composite is ε-DP for the
    /// smaller of the two nominal levels.
    pub fn compose(&self, next: &FiniteChannel) -> Result<FiniteChannel> {
        if self.n_outputs != next.n_inputs {
            return Err(Error::DimensionMismatch { expected: next.n_inputs, got: self.n_outputs });
        }
        let mut kernel = vec![0.0; self.n_inputs * next.n_outputs];
        for x in 0..self.n_inputs {
            let out = &mut kernel[x * next.n_outputs..(x + 1) * next.n_outputs];
            for (z, &pz) in self.row(x).iter().enumerate() {
                if pz == 0.0 {
                    continue;
                }
                for (o, q) in out.iter_mut().zip(next.row(z)) {
                    *o += pz * q;
                }
            }
        }
        FiniteChannel::from_flat(
            self.n_inputs,
            next.n_outputs,
            kernel,
            self.eps_nominal.min(next.eps_nominal),
            Some(next.output_supports.clone()),
        )
    }

    /// Draws an output symbol for input `x` by inverse CDF.
    pub fn sample<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = self.row(x);
        for (y, &q) in row.iter().enumerate() {
            acc += q;
            if u < acc {
                return y;
            }
        }
        // rounding left u above the last partial sum
        row.iter().rposition(|&q| q > 0.0).unwrap_or(self.n_outputs - 1)
    }
}

/// Random ε-DP kernel for fuzzing.
///
/// Each entry is a column base weight times a factor in [1, e^ε]; about half of
/// the factors sit at the extremes {1, e^ε}. After row normalisation the
/// factors are shrunk towards 1 until the certified ε* is within budget.
pub fn random_ldp_channel<R: Rng + ?Sized>(nx: usize, ny: usize, eps: f64, rng: &mut R) -> Result<FiniteChannel> {
    if nx < 2 || ny < 2 {
        return Err(Error::invalid("random_ldp_channel needs nx, ny ≥ 2"));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("ε must be finite and ≥ 0, got {eps}")));
    }
    let base: Vec<f64> = (0..ny).map(|_| 0.05 + rng.random::<f64>()).collect();
    let exponents: Vec<f64> = (0..nx * ny)
        .map(|_| {
            if rng.random::<bool>() {
                rng.random::<bool>() as u8 as f64
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    let build = |scale: f64| -> Vec<Vec<f64>> {
        (0..nx)
            .map(|x| {
                let raw: Vec<f64> = (0..ny)
                    .map(|y| base[y] * (scale * eps * exponents[x * ny + y]).exp())
                    .collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / sum).collect()
            })
            .collect()
    };
    let mut scale = 1.0;
    loop {
        let rows = build(scale);
        if column_eps(nx, ny, |x, y| rows[x][y]) <= eps * (1.0 - 1e-12) || scale == 0.0 {
            return FiniteChannel::new(rows, eps);
        }
        scale = if scale < 1e-6 { 0.0 } else { scale * 0.9 };
    }
}

/// The lazily sampled mechanisms, with their parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructuredChannel {
    Krr(KrrChannel),
    Yebarg(YeBargChannel),
    SubsampleKrr(SubsampleKrrChannel),
}

/// JSON description of a channel for reproducibility manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDescription {
    #[serde(flatten)]
    pub channel: StructuredChannel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<Vec<f64>>>,
}

impl StructuredChannel {
    pub fn eps(&self) -> f64 {
        match self {
            StructuredChannel::Krr(c) => c.eps(),
            StructuredChannel::Yebarg(c) => c.eps(),
            StructuredChannel::SubsampleKrr(c) => c.eps(),
        }
    }

    pub fn output_alphabet_size(&self) -> f64 {
        match self {
            StructuredChannel::Krr(c) => c.k() as f64,
            StructuredChannel::Yebarg(c) => c.output_alphabet_size(),
            StructuredChannel::SubsampleKrr(c) => c.n_symbols(),
        }
    }

    pub fn materialize(&self) -> Result<FiniteChannel> {
        match self {
            StructuredChannel::Krr(c) => c.materialize(),
            StructuredChannel::Yebarg(c) => c.materialize(),
            StructuredChannel::SubsampleKrr(c) => c.materialize(),
        }
    }

    /// Description including the kernel when it can be materialized.
    pub fn describe(&self) -> ChannelDescription {
        ChannelDescription { channel: self.clone(), kernel: self.materialize().ok().map(|k| k.rows()) }
    }
}

pub(crate) fn check_materializable(n_inputs: f64, n_outputs: f64) -> Result<()> {
    if n_outputs > MATERIALIZATION_CAP as f64 {
        return Err(Error::CapExceeded { size: n_outputs, cap: MATERIALIZATION_CAP });
    }
    if n_inputs * n_outputs > MAX_KERNEL_ENTRIES as f64 {
        return Err(Error::CapExceeded { size: n_inputs * n_outputs, cap: MAX_KERNEL_ENTRIES });
    }
    Ok(())
}
