//! Fisher information of privatized samples, its ε-dependent upper bounds, and
//! van Trees lower bounds on the minimax squared ℓ₂ risk.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::FiniteChannel;
use crate::error::{Error, Result};
use crate::models::{subgaussian_param, ParamDomain, StatModel, SumConstraint};

/// Output probabilities below this contribute nothing to the trace.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Tr I_Y(θ) for Y the output of `channel` on X ~ f(·|θ), via
/// Tr I_Y = Σ_y f(y|θ) ‖E[S_θ(X) | Y = y]‖².
pub fn trace_fisher_exact(model: &StatModel, channel: &FiniteChannel, theta: &[f64]) -> Result<f64> {
    let nx = model.alphabet_size().ok_or_else(|| {
        Error::Unsupported(format!("exact Fisher trace needs a finite model, got {}", model.name()))
    })?;
    if channel.n_inputs() != nx {
        return Err(Error::DimensionMismatch { expected: nx, got: channel.n_inputs() });
    }
    model.check_interior(theta)?;
    let px = model.pmf(theta)?;
    let scores = model.score_table(theta)?;
    let d = model.dim();
    let mut cond = vec![0.0; d];
    let mut total = 0.0;
    for y in 0..channel.n_outputs() {
        cond.iter_mut().for_each(|c| *c = 0.0);
        let mut fy = 0.0;
        for x in 0..nx {
            let w = channel.prob(x, y) * px[x];
            if w == 0.0 {
                continue;
            }
            fy += w;
            for (c, s) in cond.iter_mut().zip(scores[x].iter()) {
                *c += w * s;
            }
        }
        if fy < UNDERFLOW_FLOOR {
            continue;
        }
        total += cond.iter().map(|c| c * c).sum::<f64>() / fy;
    }
    Ok(total)
}

/// Tr I_X(θ) of the unprivatized sample.
pub fn source_trace(model: &StatModel, theta: &[f64]) -> Result<f64> {
    model.check_interior(theta)?;
    Ok(match *model {
        StatModel::BernoulliProduct { .. } => theta.iter().map(|t| 1.0 / (t * (1.0 - t))).sum(),
        StatModel::Multinomial { d } => {
            let last = 1.0 - theta.iter().sum::<f64>();
            theta.iter().map(|t| 1.0 / t).sum::<f64>() + d as f64 / last
        }
        StatModel::GaussianLocation { d, sigma0 } => d as f64 / (sigma0 * sigma0),
    })
}

/// Maximum of [`trace_fisher_exact`] over the domain grid.
pub fn sup_trace_over_domain(
    model: &StatModel,
    channel: &FiniteChannel,
    domain: &ParamDomain,
    resolution: usize,
) -> Result<f64> {
    if domain.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: domain.dim() });
    }
    domain
        .grid(resolution)?
        .par_iter()
        .map(|theta| trace_fisher_exact(model, channel, theta))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Score conditions under which Tr I_Y is bounded in terms of ε.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameter", rename_all = "snake_case")]
pub enum FisherBoundKind {
    /// E⟨u, S⟩² ≤ I₀ for all unit u: Tr I_Y ≤ I₀ (e^ε − 1)².
    VarianceQuadratic(f64),
    /// Same hypothesis: Tr I_Y ≤ I₀ e^ε.
    VarianceExponential(f64),
    /// ⟨u, S⟩ sub-Gaussian with parameter σ²: Tr I_Y ≤ 2σ²ε for ε ≥ 1.
    Subgaussian(f64),
    /// ⟨u, S⟩ sub-exponential with parameter σ²: Tr I_Y ≤ 2σ²ε² for ε ≥ 1.
    Subexponential(f64),
}

impl FisherBoundKind {
    pub fn parameter(&self) -> f64 {
        match *self {
            FisherBoundKind::VarianceQuadratic(p)
            | FisherBoundKind::VarianceExponential(p)
            | FisherBoundKind::Subgaussian(p)
            | FisherBoundKind::Subexponential(p) => p,
        }
    }

    pub fn applies(&self, eps: f64) -> bool {
        match self {
            FisherBoundKind::VarianceQuadratic(_) | FisherBoundKind::VarianceExponential(_) => true,
            FisherBoundKind::Subgaussian(_) | FisherBoundKind::Subexponential(_) => eps >= 1.0,
        }
    }
}

pub fn fisher_bound(kind: FisherBoundKind, eps: f64) -> Result<f64> {
    let p = kind.parameter();
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::invalid(format!("bound parameter must be positive and finite, got {p}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!("ε must be ≥ 0, got {eps}")));
    }
    if !kind.applies(eps) {
        return Err(Error::Hypothesis(format!("{kind:?} requires ε ≥ 1, got ε = {eps}")));
    }
    Ok(match kind {
        FisherBoundKind::VarianceQuadratic(i0) => i0 * eps.exp_m1().powi(2),
        FisherBoundKind::VarianceExponential(i0) => i0 * eps.exp(),
        FisherBoundKind::Subgaussian(s2) => 2.0 * s2 * eps,
        FisherBoundKind::Subexponential(s2) => 2.0 * s2 * eps * eps,
    })
}

/// min{I₀ (e^ε − 1)², I₀ e^ε}.
pub fn variance_bound(i0: f64, eps: f64) -> Result<f64> {
    Ok(fisher_bound(FisherBoundKind::VarianceQuadratic(i0), eps)?
        .min(fisher_bound(FisherBoundKind::VarianceExponential(i0), eps)?))
}

/// Smallest bound among the kinds whose hypothesis holds at ε.
pub fn tightest_bound(kinds: &[FisherBoundKind], eps: f64) -> Result<f64> {
    let mut best: Option<f64> = None;
    for &k in kinds.iter().filter(|k| k.applies(eps)) {
        let v = fisher_bound(k, eps)?;
        best = Some(best.map_or(v, |b| b.min(v)));
    }
    best.ok_or_else(|| Error::Hypothesis(format!("no bound applies at ε = {eps}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanTrees {
    pub value: f64,
    /// n·sup_trace ≥ dπ²/B², i.e. the data term dominates the prior term.
    pub data_dominant: bool,
}

/// d² / (n·sup_trace + dπ²/B²).
pub fn van_trees_bound(d: usize, n: u64, sup_trace: f64, half_width: f64) -> Result<VanTrees> {
    if d == 0 || n == 0 {
        return Err(Error::invalid(format!("van Trees needs d, n ≥ 1 (d={d}, n={n})")));
    }
    if !(sup_trace >= 0.0) || !sup_trace.is_finite() {
        return Err(Error::invalid(format!("sup trace must be finite and ≥ 0, got {sup_trace}")));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::invalid(format!("half-width must be positive, got {half_width}")));
    }
    let d_f = d as f64;
    let data = n as f64 * sup_trace;
    let prior = d_f * PI * PI / (half_width * half_width);
    Ok(VanTrees { value: d_f * d_f / (data + prior), data_dominant: data >= prior })
}

/// Certified sup over the box and unit u of E⟨u, S_θ(X)⟩².
///
/// Per coordinate 1/θ + 1/(1−θ) is convex, so box endpoints bound the
/// Bernoulli case. For the multinomial the score covariance is
/// diag(1/θ_i) + 𝟙𝟙ᵀ/θ_{d+1}, whose top eigenvalue is at most
/// max 1/θ_i + d/θ_{d+1}.
pub fn certified_score_variance(model: &StatModel, domain: &ParamDomain) -> Result<f64> {
    check_domain(model, domain)?;
    Ok(match *model {
        StatModel::GaussianLocation { sigma0, .. } => 1.0 / (sigma0 * sigma0),
        StatModel::BernoulliProduct { .. } => domain
            .intervals
            .iter()
            .map(|&(lo, hi)| bern_var(lo).max(bern_var(hi)))
            .fold(0.0, f64::max),
        StatModel::Multinomial { d } => {
            let min_lo = domain.intervals.iter().map(|i| i.0).fold(f64::INFINITY, f64::min);
            1.0 / min_lo + d as f64 / multinomial_min_last(domain)?
        }
    })
}

/// Certified sup of Tr I_X(θ) over the box.
pub fn certified_source_trace(model: &StatModel, domain: &ParamDomain) -> Result<f64> {
    check_domain(model, domain)?;
    Ok(match *model {
        StatModel::GaussianLocation { d, sigma0 } => d as f64 / (sigma0 * sigma0),
        StatModel::BernoulliProduct { .. } => domain.intervals.iter().map(|&(lo, hi)| bern_var(lo).max(bern_var(hi))).sum(),
        StatModel::Multinomial { d } => {
            domain.intervals.iter().map(|i| 1.0 / i.0).sum::<f64>() + d as f64 / multinomial_min_last(domain)?
        }
    })
}

fn bern_var(t: f64) -> f64 {
    1.0 / t + 1.0 / (1.0 - t)
}

fn multinomial_min_last(domain: &ParamDomain) -> Result<f64> {
    let last = 1.0 - domain.intervals.iter().map(|i| i.1).sum::<f64>();
    if !(last > 0.0) {
        return Err(Error::invalid("multinomial domain reaches the simplex boundary"));
    }
    Ok(last)
}

fn check_domain(model: &StatModel, domain: &ParamDomain) -> Result<()> {
    if domain.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: domain.dim() });
    }
    if model.is_finite() {
        for &(lo, hi) in &domain.intervals {
            if !(lo > 0.0) || !(hi < 1.0) {
                return Err(Error::invalid(format!("interval [{lo}, {hi}] touches a score singularity")));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corollary {
    /// Gaussian location, rate σ₀²d²/(n·min{ε², ε}).
    GaussianLocation,
    /// Discrete distributions on d+1 symbols, rate d/(n·min{(e^ε−1)², e^ε}).
    DiscreteDistribution,
    /// Σθ ≤ 1, rate d/(n·min{(e^ε−1)², e^ε, d}).
    SparseBernoulli,
    /// s-sparse with ε ≤ ln(d/s), rate sd/(n·min{(e^ε−1)², e^ε, d}).
    SSparseHighPrivacy,
    /// s-sparse with ε > ln(d/s), rate s² ln d/(nε). The side condition
    /// additionally asks for 20 ln d ≤ ε ≤ s ln d, which is empty for s < 20.
    SSparseLowPrivacy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub corollary: Corollary,
    pub d: usize,
    pub n: u64,
    pub eps: f64,
    pub half_width: f64,
    pub i0: f64,
    pub sigma2: Option<f64>,
    /// Upper bound on sup_θ Tr I_Y(θ) fed into van Trees.
    pub sup_trace: f64,
    pub van_trees_value: f64,
    pub data_dominant: bool,
    /// The corollary's side condition on n, evaluated.
    pub condition_ok: bool,
    /// The corollary's order-wise rate (without its constant).
    pub rate: f64,
}

/// min{(e^ε−1)², e^ε}.
pub fn privacy_factor(eps: f64) -> f64 {
    eps.exp_m1().powi(2).min(eps.exp())
}

/// Order-wise rate and side condition of a corollary. `s` is the sparsity
/// (ignored outside the s-sparse cases), `sigma0` the Gaussian noise level.
pub fn corollary_rate(corollary: Corollary, d: usize, s: f64, n: u64, eps: f64, sigma0: f64, half_width: f64) -> (f64, bool) {
    let (d_f, n_f) = (d as f64, n as f64);
    let ln_d = d_f.ln();
    match corollary {
        Corollary::GaussianLocation => {
            let m = (eps * eps).min(eps);
            let s2 = sigma0 * sigma0;
            (s2 * d_f * d_f / (n_f * m), n_f * m / s2 >= d_f / (half_width * half_width))
        }
        Corollary::DiscreteDistribution => {
            let m = privacy_factor(eps);
            (d_f / (n_f * m), n_f * m >= d_f * d_f)
        }
        Corollary::SparseBernoulli => {
            let m = privacy_factor(eps);
            (d_f / (n_f * m.min(d_f)), n_f * m >= d_f * d_f)
        }
        Corollary::SSparseHighPrivacy => (
            s * d_f / (n_f * privacy_factor(eps).min(d_f)),
            n_f / n_f.ln() >= 20.0 * d_f.powi(3) * ln_d / (eps * eps).min(1.0),
        ),
        Corollary::SSparseLowPrivacy => (
            s * s * ln_d / (n_f * eps),
            n_f * eps >= d_f * ln_d && eps >= 20.0 * ln_d && eps <= s * ln_d,
        ),
    }
}

/// Picks the corollary matching `(model, domain)`, bounds sup Tr I_Y by the
/// tightest applicable data-processing bound (and the unprivatized trace),
/// and evaluates van Trees.
pub fn minimax_lower_bound(model: &StatModel, domain: &ParamDomain, n: u64, eps: f64) -> Result<LowerBoundReport> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("ε must be positive and finite, got {eps}")));
    }
    let d = model.dim();
    let i0 = certified_score_variance(model, domain)?;
    let half_width = domain.half_width();
    let (corollary, s, sigma0) = match *model {
        StatModel::GaussianLocation { sigma0, .. } => (Corollary::GaussianLocation, 0.0, sigma0),
        StatModel::Multinomial { .. } => (Corollary::DiscreteDistribution, 0.0, 0.0),
        StatModel::BernoulliProduct { .. } => {
            let s = match domain.constraint {
                Some(SumConstraint::AtMost(s)) => s,
                _ => {
                    return Err(Error::Unsupported(
                        "product Bernoulli bounds need a sparsity constraint Σθ ≤ s".into(),
                    ))
                }
            };
            let d_f = d as f64;
            let c = if s <= 1.0 {
                Corollary::SparseBernoulli
            } else if eps <= (d_f / s).ln() {
                Corollary::SSparseHighPrivacy
            } else {
                Corollary::SSparseLowPrivacy
            };
            (c, s, 0.0)
        }
    };
    let sigma2 = match model {
        StatModel::Multinomial { .. } => None,
        _ => Some(subgaussian_param(model, domain)?),
    };
    let mut kinds = vec![FisherBoundKind::VarianceQuadratic(i0), FisherBoundKind::VarianceExponential(i0)];
    if let Some(s2) = sigma2 {
        kinds.push(FisherBoundKind::Subgaussian(s2));
    }
    let sup_trace = tightest_bound(&kinds, eps)?.min(certified_source_trace(model, domain)?);
    let vt = van_trees_bound(d, n, sup_trace, half_width)?;
    let (rate, condition_ok) = corollary_rate(corollary, d, s, n, eps, sigma0, half_width);
    Ok(LowerBoundReport {
        corollary,
        d,
        n,
        eps,
        half_width,
        i0,
        sigma2,
        sup_trace,
        van_trees_value: vt.value,
        data_dominant: vt.data_dominant,
        condition_ok,
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{make_binary_rr, random_ldp_channel};
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    #[test]
    fn trace_examples() {
        let m = StatModel::bernoulli(1).unwrap();
        let rr = make_binary_rr(3f64.ln()).unwrap().materialize().unwrap();
        assert_relative_eq!(trace_fisher_exact(&m, &rr, &[0.5]).unwrap(), 1.0, epsilon = 1e-14);
        let id = FiniteChannel::identity(2).unwrap();
        assert_relative_eq!(trace_fisher_exact(&m, &id, &[0.5]).unwrap(), 4.0, epsilon = 1e-14);
        let mult = StatModel::multinomial(2).unwrap();
        let u = FiniteChannel::uniform(3, 5).unwrap();
        assert!(trace_fisher_exact(&mult, &u, &[0.2, 0.3]).unwrap().abs() < 1e-14);
        let g = StatModel::gaussian(2, 1.0).unwrap();
        assert!(matches!(trace_fisher_exact(&g, &u, &[0.0, 0.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn binary_rr_closed_form() {
        // m(θ) = θ(e−1)/(e+1) + 1/(e+1); I = m'² / (m(1−m))
        let m = StatModel::bernoulli(1).unwrap();
        for eps in [0.3, 1.0, 2.2] {
            let rr = make_binary_rr(eps).unwrap().materialize().unwrap();
            let e = f64::exp(eps);
            for t in [0.1, 0.37, 0.8] {
                let mt = t * (e - 1.0) / (e + 1.0) + 1.0 / (e + 1.0);
                let slope = (e - 1.0) / (e + 1.0);
                let want = slope * slope / (mt * (1.0 - mt));
                assert_relative_eq!(trace_fisher_exact(&m, &rr, &[t]).unwrap(), want, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn sup_over_domain() {
        let m = StatModel::bernoulli(1).unwrap();
        let dom = ParamDomain::cube(1, 0.3, 0.7).unwrap();
        let rr = make_binary_rr(1.0).unwrap().materialize().unwrap();
        let sup = sup_trace_over_domain(&m, &rr, &dom, 5).unwrap();
        let e = 1f64.exp();
        let slope = (e - 1.0) / (e + 1.0);
        let f = |t: f64| {
            let mt = t * slope + 1.0 / (e + 1.0);
            slope * slope / (mt * (1.0 - mt))
        };
        assert_relative_eq!(sup, f(0.3).max(f(0.5)).max(f(0.7)), epsilon = 1e-10);
        let id = FiniteChannel::identity(2).unwrap();
        let dom = ParamDomain::cube(1, 0.4, 0.6).unwrap();
        assert_relative_eq!(sup_trace_over_domain(&m, &id, &dom, 5).unwrap(), 1.0 / 0.24, epsilon = 1e-12);
        let u = FiniteChannel::uniform(2, 3).unwrap();
        assert!(sup_trace_over_domain(&m, &u, &dom, 5).unwrap().abs() < 1e-14);
    }

    #[test]
    fn bound_examples() {
        assert_relative_eq!(fisher_bound(FisherBoundKind::VarianceQuadratic(4.0), 2f64.ln()).unwrap(), 4.0, epsilon = 1e-14);
        assert_eq!(fisher_bound(FisherBoundKind::VarianceQuadratic(3.0), 0.0).unwrap(), 0.0);
        assert_eq!(fisher_bound(FisherBoundKind::Subgaussian(2.0), 2.0).unwrap(), 8.0);
        assert_eq!(fisher_bound(FisherBoundKind::Subexponential(2.0), 2.0).unwrap(), 16.0);
        assert!(matches!(fisher_bound(FisherBoundKind::Subgaussian(2.0), 0.5), Err(Error::Hypothesis(_))));
        assert_relative_eq!(variance_bound(1.0, 3.0).unwrap(), 3f64.exp(), epsilon = 1e-12);
        assert_relative_eq!(variance_bound(1.0, 0.2).unwrap(), 0.2f64.exp_m1().powi(2), epsilon = 1e-15);
        let kinds = [FisherBoundKind::VarianceQuadratic(1.0), FisherBoundKind::Subgaussian(0.1)];
        assert_relative_eq!(tightest_bound(&kinds, 0.5).unwrap(), 0.5f64.exp_m1().powi(2));
        assert_relative_eq!(tightest_bound(&kinds, 2.0).unwrap(), 0.4);
    }

    #[test]
    fn van_trees_examples() {
        let vt = van_trees_bound(1, 100, 1.0, PI).unwrap();
        assert_relative_eq!(vt.value, 1.0 / 101.0, epsilon = 1e-15);
        assert!(vt.data_dominant);
        assert_relative_eq!(van_trees_bound(3, 10, 0.0, 2.0).unwrap().value, 4.0 * 3.0 / (PI * PI), epsilon = 1e-14);
        let a = van_trees_bound(4, 1_000_000, 2.0, 1.0).unwrap().value;
        let b = van_trees_bound(4, 2_000_000, 2.0, 1.0).unwrap().value;
        assert!((a / b - 2.0).abs() < 0.02);
        assert!(van_trees_bound(0, 1, 1.0, 1.0).is_err());
        assert!(van_trees_bound(1, 1, 1.0, 0.0).is_err());
    }

    #[test]
    fn multinomial_uses_six_d() {
        let d = 5;
        let m = StatModel::multinomial(d).unwrap();
        let dom = ParamDomain::multinomial_local(d).unwrap();
        assert_relative_eq!(certified_score_variance(&m, &dom).unwrap(), 6.0 * d as f64, epsilon = 1e-12);
        let r = minimax_lower_bound(&m, &dom, 1_000_000, 1.0).unwrap();
        assert_eq!(r.corollary, Corollary::DiscreteDistribution);
        assert_eq!(r.i0, 30.0);
        assert_relative_eq!(r.sup_trace, 30.0 * privacy_factor(1.0), epsilon = 1e-12);
        assert!(r.condition_ok);
    }

    #[test]
    fn gaussian_small_eps() {
        let (d, n, eps) = (4, 10_000u64, 0.5);
        let m = StatModel::gaussian(d, 1.0).unwrap();
        let dom = ParamDomain::symmetric_cube(d, 1.0).unwrap();
        let r = minimax_lower_bound(&m, &dom, n, eps).unwrap();
        assert_eq!(r.corollary, Corollary::GaussianLocation);
        let e1 = 1f64.exp() - 1.0;
        let remark = (d * d) as f64 / (n as f64 * e1 * e1 * eps * eps + d as f64 * PI * PI);
        assert!(r.van_trees_value >= remark);
        assert!(r.condition_ok);
        assert_relative_eq!(r.rate, 16.0 / (1e4 * 0.25));
    }

    #[test]
    fn sparse_regimes() {
        let m = StatModel::bernoulli(8).unwrap();
        let r = minimax_lower_bound(&m, &ParamDomain::sparse_bernoulli(8, 1.0).unwrap(), 200_000, 1.0).unwrap();
        assert_eq!(r.corollary, Corollary::SparseBernoulli);
        assert!(r.i0 <= 3.0 * 8.0);
        let r = minimax_lower_bound(&m, &ParamDomain::sparse_bernoulli(8, 2.0).unwrap(), 400_000, 1.0).unwrap();
        assert_eq!(r.corollary, Corollary::SSparseHighPrivacy);
        let m = StatModel::bernoulli(32).unwrap();
        let r = minimax_lower_bound(&m, &ParamDomain::sparse_bernoulli(32, 4.0).unwrap(), 100_000, 100.0).unwrap();
        assert_eq!(r.corollary, Corollary::SSparseLowPrivacy);
        assert!(r.sigma2.is_some());
        let dom = ParamDomain::sparse_bernoulli(32, 4.0).unwrap();
        let cap = certified_source_trace(&m, &dom).unwrap();
        assert_relative_eq!(r.sup_trace, (2.0 * r.sigma2.unwrap() * 100.0).min(cap), max_relative = 1e-12);
        assert_relative_eq!(r.rate, 16.0 * 32f64.ln() / (1e5 * 100.0));
        assert!(!r.condition_ok);
        let r = minimax_lower_bound(&m, &ParamDomain::sparse_bernoulli(32, 4.0).unwrap(), 100_000, 12.0).unwrap();
        assert_eq!(r.corollary, Corollary::SSparseLowPrivacy);
        assert!(minimax_lower_bound(&m, &ParamDomain::cube(32, 0.1, 0.2).unwrap(), 10, 1.0).is_err());
    }

    #[test]
    fn fuzzed_channels_respect_bounds() {
        let mut rng = seeded(2);
        let m = StatModel::bernoulli(2).unwrap();
        let theta = [0.3, 0.6];
        let i0 = m.score_variance_at(&theta).unwrap();
        for _ in 0..200 {
            let ch = random_ldp_channel(4, 4, 1.0, &mut rng).unwrap();
            let tr = trace_fisher_exact(&m, &ch, &theta).unwrap();
            assert!(tr <= variance_bound(i0, 1.0).unwrap() + 1e-9);
            assert!(tr <= source_trace(&m, &theta).unwrap() + 1e-9);
        }
    }
}
