//! Statistical families: product Bernoulli, multinomial and Gaussian location.
//!
//! Finite families expose their sample space as symbol indices so that
//! channels, Fisher computations and oracles can enumerate it:
//!
//! * `BernoulliProduct { d }`: symbol `i` is the bit vector with `x_j = (i >> j) & 1`.
//! * `Multinomial { d }`: symbols `0..=d`; symbol `d` is the derived category
//!   whose probability is `1 - Σθ`. The free parameters are the first `d`
//!   category probabilities.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance from {0, 1} below which Bernoulli/multinomial parameters are
/// rejected as singular.
pub const SINGULARITY_GUARD: f64 = 1e-9;

/// Largest product-Bernoulli dimension whose sample space is enumerated.
pub const MAX_ENUMERABLE_BERNOULLI_DIM: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatModel {
    BernoulliProduct { d: usize },
    Multinomial { d: usize },
    GaussianLocation { d: usize, sigma0: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sample {
    Binary(Vec<u8>),
    Category(usize),
    Real(Vec<f64>),
}

/// ∇_θ log f(x|θ).
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn dot(&self, u: &[f64]) -> f64 {
        self.0.iter().zip(u).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }
}

impl std::ops::Deref for ScoreVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl StatModel {
    pub fn bernoulli(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("bernoulli_product needs d ≥ 1"));
        }
        Ok(StatModel::BernoulliProduct { d })
    }

    pub fn multinomial(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("multinomial needs d ≥ 1 free coordinates"));
        }
        Ok(StatModel::Multinomial { d })
    }

    pub fn gaussian(d: usize, sigma0: f64) -> Result<Self> {
        if d == 0 || !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::invalid(format!(
                "gaussian_location needs d ≥ 1 and σ₀ > 0 (got d={d}, σ₀={sigma0})"
            )));
        }
        Ok(StatModel::GaussianLocation { d, sigma0 })
    }

    pub fn dim(&self) -> usize {
        match *self {
            StatModel::BernoulliProduct { d }
            | StatModel::Multinomial { d }
            | StatModel::GaussianLocation { d, .. } => d,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StatModel::BernoulliProduct { .. } => "bernoulli_product",
            StatModel::Multinomial { .. } => "multinomial",
            StatModel::GaussianLocation { .. } => "gaussian_location",
        }
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, StatModel::GaussianLocation { .. })
    }

    /// Number of sample-space symbols, when the space is finite and enumerable.
    pub fn alphabet_size(&self) -> Option<usize> {
        match *self {
            StatModel::BernoulliProduct { d } if d <= MAX_ENUMERABLE_BERNOULLI_DIM => Some(1 << d),
            StatModel::Multinomial { d } => Some(d + 1),
            _ => None,
        }
    }

    fn enumerable(&self) -> Result<usize> {
        self.alphabet_size().ok_or_else(|| {
            Error::Unsupported(format!(
                "{} with d = {} has no enumerable sample space",
                self.name(),
                self.dim()
            ))
        })
    }

    /// Checks that θ is a valid (possibly boundary) parameter.
    pub fn check_param(&self, theta: &[f64]) -> Result<()> {
        let d = self.dim();
        if theta.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta.len() });
        }
        match self {
            StatModel::BernoulliProduct { .. } => {
                if let Some((j, &t)) = theta.iter().enumerate().find(|(_, t)| !(0.0..=1.0).contains(*t)) {
                    return Err(Error::invalid(format!("θ[{j}] = {t} outside [0, 1]")));
                }
            }
            StatModel::Multinomial { .. } => {
                if let Some((j, &t)) = theta.iter().enumerate().find(|(_, t)| !(**t >= 0.0)) {
                    return Err(Error::invalid(format!("θ[{j}] = {t} is negative")));
                }
                let sum: f64 = theta.iter().sum();
                if sum > 1.0 + 1e-12 {
                    return Err(Error::invalid(format!("free coordinates sum to {sum} > 1")));
                }
            }
            StatModel::GaussianLocation { .. } => {
                if theta.iter().any(|t| !t.is_finite()) {
                    return Err(Error::invalid("non-finite Gaussian location"));
                }
            }
        }
        Ok(())
    }

    /// Checks that θ is far enough from the score singularities.
    pub fn check_interior(&self, theta: &[f64]) -> Result<()> {
        self.check_param(theta)?;
        let singular = |index: usize, value: f64| Error::SingularParameter {
            index,
            value,
            guard: SINGULARITY_GUARD,
        };
        match self {
            StatModel::BernoulliProduct { .. } => {
                for (j, &t) in theta.iter().enumerate() {
                    if !(SINGULARITY_GUARD..=1.0 - SINGULARITY_GUARD).contains(&t) {
                        return Err(singular(j, t));
                    }
                }
            }
            StatModel::Multinomial { d } => {
                for (j, &t) in theta.iter().enumerate() {
                    if t < SINGULARITY_GUARD {
                        return Err(singular(j, t));
                    }
                }
                let last = 1.0 - theta.iter().sum::<f64>();
                if last < SINGULARITY_GUARD {
                    return Err(singular(*d, last));
                }
            }
            StatModel::GaussianLocation { .. } => {}
        }
        Ok(())
    }

    /// Full probability vector of a finite model, indexed by symbol.
    pub fn pmf(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let size = self.enumerable()?;
        self.check_param(theta)?;
        Ok(match self {
            StatModel::BernoulliProduct { .. } => (0..size)
                .map(|idx| {
                    theta
                        .iter()
                        .enumerate()
                        .map(|(j, &t)| if (idx >> j) & 1 == 1 { t } else { 1.0 - t })
                        .product()
                })
                .collect(),
            StatModel::Multinomial { .. } => {
                let mut p = theta.to_vec();
                p.push((1.0 - theta.iter().sum::<f64>()).max(0.0));
                p
            }
            StatModel::GaussianLocation { .. } => unreachable!(),
        })
    }

    pub fn symbol(&self, idx: usize) -> Result<Sample> {
        let size = self.enumerable()?;
        if idx >= size {
            return Err(Error::invalid(format!("symbol {idx} outside alphabet of size {size}")));
        }
        Ok(match *self {
            StatModel::BernoulliProduct { d } => Sample::Binary((0..d).map(|j| ((idx >> j) & 1) as u8).collect()),
            StatModel::Multinomial { .. } => Sample::Category(idx),
            StatModel::GaussianLocation { .. } => unreachable!(),
        })
    }

    pub fn symbol_index(&self, x: &Sample) -> Result<usize> {
        let size = self.enumerable()?;
        match (self, x) {
            (StatModel::BernoulliProduct { d }, Sample::Binary(bits)) if bits.len() == *d => {
                Ok(bits.iter().enumerate().map(|(j, &b)| (b as usize & 1) << j).sum())
            }
            (StatModel::Multinomial { .. }, Sample::Category(c)) if *c < size => Ok(*c),
            _ => Err(Error::invalid(format!("sample {x:?} is not in the {} sample space", self.name()))),
        }
    }

    /// Score S_θ(x) = ∇_θ log f(x|θ).
    pub fn score(&self, theta: &[f64], x: &Sample) -> Result<ScoreVector> {
        self.check_interior(theta)?;
        let d = self.dim();
        let s = match (self, x) {
            (StatModel::BernoulliProduct { .. }, Sample::Binary(bits)) if bits.len() == d => theta
                .iter()
                .zip(bits)
                .map(|(&t, &b)| match b {
                    1 => 1.0 / t,
                    0 => -1.0 / (1.0 - t),
                    _ => f64::NAN,
                })
                .collect::<Vec<_>>(),
            (StatModel::Multinomial { .. }, Sample::Category(c)) if *c <= d => {
                let last = 1.0 - theta.iter().sum::<f64>();
                (0..d)
                    .map(|i| {
                        if *c == i {
                            1.0 / theta[i]
                        } else if *c == d {
                            -1.0 / last
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            (StatModel::GaussianLocation { sigma0, .. }, Sample::Real(v)) if v.len() == d => {
                let var = sigma0 * sigma0;
                v.iter().zip(theta).map(|(x, t)| (x - t) / var).collect()
            }
            _ => {
                return Err(Error::invalid(format!(
                    "sample {x:?} is not in the {} sample space",
                    self.name()
                )))
            }
        };
        if s.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid(format!("sample {x:?} has non-binary entries")));
        }
        Ok(ScoreVector(s))
    }

    /// Scores of every symbol of a finite model, indexed by symbol.
    pub fn score_table(&self, theta: &[f64]) -> Result<Vec<ScoreVector>> {
        let size = self.enumerable()?;
        (0..size).map(|i| self.score(theta, &self.symbol(i)?)).collect()
    }

    pub fn log_density(&self, theta: &[f64], x: &Sample) -> Result<f64> {
        self.check_param(theta)?;
        match self {
            StatModel::GaussianLocation { d, sigma0 } => match x {
                Sample::Real(v) if v.len() == *d => {
                    let var = sigma0 * sigma0;
                    let sq: f64 = v.iter().zip(theta).map(|(x, t)| (x - t) * (x - t)).sum();
                    Ok(-sq / (2.0 * var) - 0.5 * *d as f64 * (2.0 * std::f64::consts::PI * var).ln())
                }
                _ => Err(Error::invalid("gaussian sample has the wrong shape")),
            },
            _ => {
                let idx = self.symbol_index(x)?;
                Ok(self.pmf(theta)?[idx].ln())
            }
        }
    }

    /// One draw from P_θ.
    pub fn sample<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> Result<Sample> {
        self.check_param(theta)?;
        Ok(match *self {
            StatModel::BernoulliProduct { d } => {
                let mut bits = vec![0u8; d];
                sample_bits_into(theta, rng, &mut bits);
                Sample::Binary(bits)
            }
            StatModel::Multinomial { .. } => Sample::Category(sample_category(theta, rng)),
            StatModel::GaussianLocation { sigma0, .. } => Sample::Real(
                theta
                    .iter()
                    .map(|t| t + sigma0 * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            ),
        })
    }

    /// Second-moment matrix E[S Sᵀ] of the score at θ.
    pub fn score_covariance(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_interior(theta)?;
        let d = self.dim();
        Ok(match *self {
            StatModel::BernoulliProduct { .. } => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    d,
                    theta.iter().map(|t| 1.0 / t + 1.0 / (1.0 - t)),
                ))
            }
            StatModel::Multinomial { .. } => {
                let last = 1.0 - theta.iter().sum::<f64>();
                let mut m = DMatrix::from_element(d, d, 1.0 / last);
                for i in 0..d {
                    m[(i, i)] += 1.0 / theta[i];
                }
                m
            }
            StatModel::GaussianLocation { sigma0, .. } => DMatrix::identity(d, d) / (sigma0 * sigma0),
        })
    }

    /// sup over unit u of E⟨u, S_θ(X)⟩² at a single θ.
    pub fn score_variance_at(&self, theta: &[f64]) -> Result<f64> {
        self.check_interior(theta)?;
        Ok(match *self {
            StatModel::BernoulliProduct { .. } => theta
                .iter()
                .map(|t| 1.0 / t + 1.0 / (1.0 - t))
                .fold(0.0, f64::max),
            StatModel::Multinomial { d } => {
                let last = 1.0 - theta.iter().sum::<f64>();
                let closed_form = d as f64 / last + theta.iter().map(|t| 1.0 / t).fold(0.0, f64::max);
                let eig = SymmetricEigen::new(self.score_covariance(theta)?)
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                // The eigenvalue is exact; allow for its rounding before comparing.
                (eig * (1.0 + 1e-12)).min(closed_form)
            }
            StatModel::GaussianLocation { sigma0, .. } => 1.0 / (sigma0 * sigma0),
        })
    }

    /// E[exp((⟨u, S⟩/σ)²)] by exact enumeration over a finite sample space.
    pub fn subgaussian_moment(&self, theta: &[f64], u: &[f64], sigma2: f64) -> Result<f64> {
        let pmf = self.pmf(theta)?;
        let scores = self.score_table(theta)?;
        Ok(pmf
            .iter()
            .zip(&scores)
            .map(|(p, s)| {
                let v = s.dot(u);
                p * (v * v / sigma2).exp()
            })
            .sum())
    }
}

/// Fills `out` with independent Bernoulli(θ_j) bits.
pub fn sample_bits_into<R: Rng + ?Sized>(theta: &[f64], rng: &mut R, out: &mut [u8]) {
    for (o, &t) in out.iter_mut().zip(theta) {
        *o = (rng.random::<f64>() < t) as u8;
    }
}

/// Draws a category from free probabilities `theta`; returns `theta.len()`
/// for the derived category.
pub fn sample_category<R: Rng + ?Sized>(theta: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &t) in theta.iter().enumerate() {
        acc += t;
        if u < acc {
            return i;
        }
    }
    theta.len()
}

/// Linear constraint on the free coordinates of a domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SumConstraint {
    AtMost(f64),
    Exactly(f64),
}

/// Box of per-coordinate closed intervals with an optional sum constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDomain {
    pub intervals: Vec<(f64, f64)>,
    pub constraint: Option<SumConstraint>,
}

impl ParamDomain {
    pub fn new(intervals: Vec<(f64, f64)>, constraint: Option<SumConstraint>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::invalid("domain needs at least one coordinate"));
        }
        for (j, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!("interval {j} = [{lo}, {hi}] is empty")));
            }
        }
        if let Some(SumConstraint::AtMost(s)) = constraint {
            let max_sum: f64 = intervals.iter().map(|i| i.1).sum();
            if s + 1e-12 < max_sum {
                return Err(Error::invalid(format!(
                    "sparsity budget {s} is below the box maximum Σθ = {max_sum}"
                )));
            }
        }
        Ok(ParamDomain { intervals, constraint })
    }

    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi); d], None)
    }

    /// [-B, B]^d.
    pub fn symmetric_cube(d: usize, half_width: f64) -> Result<Self> {
        Self::cube(d, -half_width, half_width)
    }

    /// Θ' = [1/(4d), 1/(2d)]^d for the d free multinomial coordinates.
    pub fn multinomial_local(d: usize) -> Result<Self> {
        let d_f = d as f64;
        Self::new(vec![(1.0 / (4.0 * d_f), 1.0 / (2.0 * d_f)); d], None)
    }

    /// [s/(2d), s/d]^d with Σθ ≤ s.
    pub fn sparse_bernoulli(d: usize, s: f64) -> Result<Self> {
        let d_f = d as f64;
        Self::new(vec![(s / (2.0 * d_f), s / d_f); d], Some(SumConstraint::AtMost(s)))
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    /// Half-width B used by the van Trees prior term (the smallest one when
    /// the box is not a cube).
    pub fn half_width(&self) -> f64 {
        self.intervals
            .iter()
            .map(|(lo, hi)| 0.5 * (hi - lo))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sparsity(&self) -> Option<f64> {
        match self.constraint {
            Some(SumConstraint::AtMost(s)) => Some(s),
            _ => None,
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(&self.intervals)
                .all(|(t, (lo, hi))| *t >= *lo && *t <= *hi)
    }

    pub fn default_resolution(&self) -> usize {
        if self.dim() <= 3 {
            17
        } else {
            9
        }
    }

    /// Tensor grid for d ≤ 3, otherwise `resolution` points on the diagonal
    /// slice θ_j = lo_j + t (hi_j − lo_j).
    pub fn grid(&self, resolution: usize) -> Result<Vec<Vec<f64>>> {
        if resolution < 2 {
            return Err(Error::invalid("grid resolution must be at least 2"));
        }
        let axis = |j: usize, k: usize| {
            let (lo, hi) = self.intervals[j];
            lo + (hi - lo) * k as f64 / (resolution - 1) as f64
        };
        let d = self.dim();
        if d <= 3 {
            let total = resolution.pow(d as u32);
            Ok((0..total)
                .map(|mut flat| {
                    (0..d)
                        .map(|j| {
                            let k = flat % resolution;
                            flat /= resolution;
                            axis(j, k)
                        })
                        .collect()
                })
                .collect())
        } else {
            Ok((0..resolution).map(|k| (0..d).map(|j| axis(j, k)).collect()).collect())
        }
    }
}

/// Upper bound on sup over the domain grid and unit directions u of
/// E⟨u, S_θ(X)⟩², computed exactly at each grid point.
pub fn score_variance_sup(model: &StatModel, domain: &ParamDomain, grid_resolution: usize) -> Result<f64> {
    if let StatModel::GaussianLocation { sigma0, .. } = *model {
        return Ok(1.0 / (sigma0 * sigma0));
    }
    if domain.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: domain.dim() });
    }
    let mut sup: f64 = 0.0;
    for theta in domain.grid(grid_resolution)? {
        sup = sup.max(model.score_variance_at(&theta)?);
    }
    Ok(sup)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// ln E[exp(S_j²·a)] for one Bernoulli(θ) coordinate.
fn ln_bernoulli_sq_moment(theta: f64, a: f64) -> f64 {
    log_sum_exp(theta.ln() + a / (theta * theta), (1.0 - theta).ln() + a / ((1.0 - theta) * (1.0 - theta)))
}

/// Sub-Gaussian parameter σ² of the score over a domain.
///
/// For the product Bernoulli family the certificate goes through
/// |⟨u, S⟩| ≤ ‖S‖₂, which factorises over coordinates:
/// E exp(‖S‖²/σ²) = Π_j E exp(S_j²/σ²). Each factor is convex in θ_j, so its
/// supremum over an interval sits at an endpoint. The returned σ² makes the
/// product at most 2, hence E exp((⟨u, S⟩/σ)²) ≤ 2 for every unit u and every
/// θ in the box.
pub fn subgaussian_param(model: &StatModel, domain: &ParamDomain) -> Result<f64> {
    match *model {
        StatModel::GaussianLocation { sigma0, .. } => Ok(gaussian_subgaussian_sigma2(sigma0)),
        StatModel::Multinomial { .. } => Err(Error::Unsupported(
            "sub-Gaussian certification is only provided for product Bernoulli and Gaussian models".into(),
        )),
        StatModel::BernoulliProduct { d } => {
            if domain.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: domain.dim() });
            }
            for &(lo, hi) in &domain.intervals {
                model.check_interior(&vec![lo; d])?;
                model.check_interior(&vec![hi; d])?;
            }
            let log_moment = |a: f64| -> f64 {
                domain
                    .intervals
                    .iter()
                    .map(|&(lo, hi)| ln_bernoulli_sq_moment(lo, a).max(ln_bernoulli_sq_moment(hi, a)))
                    .sum()
            };
            Ok(1.0 / largest_feasible_rate(log_moment))
        }
    }
}

/// Sub-Gaussian σ² certified at a single parameter point.
pub fn subgaussian_param_at(model: &StatModel, theta: &[f64]) -> Result<f64> {
    match *model {
        StatModel::GaussianLocation { sigma0, .. } => Ok(gaussian_subgaussian_sigma2(sigma0)),
        StatModel::Multinomial { .. } => Err(Error::Unsupported(
            "sub-Gaussian certification is only provided for product Bernoulli and Gaussian models".into(),
        )),
        StatModel::BernoulliProduct { .. } => {
            model.check_interior(theta)?;
            let log_moment = |a: f64| -> f64 { theta.iter().map(|&t| ln_bernoulli_sq_moment(t, a)).sum() };
            Ok(1.0 / largest_feasible_rate(log_moment))
        }
    }
}

/// ⟨u, S⟩ ~ N(0, 1/σ₀²) for every unit u, and E exp(Z²/σ²) = (1 − 2τ²/σ²)^{-1/2}
/// equals 2 at σ² = 8τ²/3.
fn gaussian_subgaussian_sigma2(sigma0: f64) -> f64 {
    8.0 / (3.0 * sigma0 * sigma0)
}

/// Largest a ≥ 0 with `log_moment(a) ≤ ln 2`, for increasing `log_moment`
/// with `log_moment(0) = 0`. Returns a feasible point.
fn largest_feasible_rate(log_moment: impl Fn(f64) -> f64) -> f64 {
    let target = std::f64::consts::LN_2;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while log_moment(hi) <= target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_moment(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    #[test]
    fn bernoulli_scores() {
        let m = StatModel::bernoulli(1).unwrap();
        assert_eq!(m.score(&[0.25], &Sample::Binary(vec![1])).unwrap().0, vec![4.0]);
        assert_eq!(m.score(&[0.5], &Sample::Binary(vec![0])).unwrap().0, vec![-2.0]);
    }

    #[test]
    fn multinomial_score_on_derived_category() {
        let m = StatModel::multinomial(2).unwrap();
        let s = m.score(&[0.3, 0.3], &Sample::Category(2)).unwrap();
        assert_relative_eq!(s[0], -2.5, epsilon = 1e-12);
        assert_relative_eq!(s[1], -2.5, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_score_matches_finite_difference() {
        let m = StatModel::gaussian(1, 1.0).unwrap();
        let x = Sample::Real(vec![1.0]);
        assert_eq!(m.score(&[0.0], &x).unwrap().0, vec![1.0]);
        let h = 1e-6;
        let fd = (m.log_density(&[h], &x).unwrap() - m.log_density(&[-h], &x).unwrap()) / (2.0 * h);
        assert_relative_eq!(fd, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn singular_parameters_are_rejected() {
        let m = StatModel::bernoulli(2).unwrap();
        assert!(matches!(
            m.score(&[0.0, 0.5], &Sample::Binary(vec![0, 0])),
            Err(Error::SingularParameter { index: 0, .. })
        ));
        assert!(matches!(
            m.score(&[0.5, 1.0 - 1e-12], &Sample::Binary(vec![0, 0])),
            Err(Error::SingularParameter { index: 1, .. })
        ));
        let mn = StatModel::multinomial(2).unwrap();
        assert!(matches!(
            mn.score(&[0.5, 0.5], &Sample::Category(0)),
            Err(Error::SingularParameter { index: 2, .. })
        ));
    }

    #[test]
    fn degenerate_samplers() {
        let mut rng = seeded(1);
        let b = StatModel::bernoulli(4).unwrap();
        for _ in 0..100 {
            assert_eq!(b.sample(&[1.0; 4], &mut rng).unwrap(), Sample::Binary(vec![1; 4]));
        }
        let m = StatModel::multinomial(3).unwrap();
        for _ in 0..100 {
            assert_eq!(m.sample(&[1.0, 0.0, 0.0], &mut rng).unwrap(), Sample::Category(0));
        }
    }

    #[test]
    fn bernoulli_sampler_mean() {
        let mut rng = seeded(2);
        let b = StatModel::bernoulli(1).unwrap();
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| b.sample(&[0.5], &mut rng).unwrap() == Sample::Binary(vec![1]))
            .count();
        let mean = ones as f64 / n as f64;
        assert!((mean - 0.5).abs() <= 3.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn pmf_and_symbols_roundtrip() {
        let b = StatModel::bernoulli(3).unwrap();
        let p = b.pmf(&[0.1, 0.2, 0.3]).unwrap();
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(p[0b101], 0.1 * 0.8 * 0.3, epsilon = 1e-15);
        for i in 0..8 {
            assert_eq!(b.symbol_index(&b.symbol(i).unwrap()).unwrap(), i);
        }
    }

    #[test]
    fn variance_sup_values() {
        for d in [2, 3, 5, 8] {
            let m = StatModel::multinomial(d).unwrap();
            let dom = ParamDomain::multinomial_local(d).unwrap();
            let v = score_variance_sup(&m, &dom, dom.default_resolution()).unwrap();
            assert!(v <= 6.0 * d as f64, "d={d}: {v}");

            let b = StatModel::bernoulli(d).unwrap();
            let dom = ParamDomain::sparse_bernoulli(d, 1.0).unwrap();
            let v = score_variance_sup(&b, &dom, dom.default_resolution()).unwrap();
            assert!(v <= 3.0 * d as f64, "d={d}: {v}");
        }
        let g = StatModel::gaussian(3, 2.0).unwrap();
        let dom = ParamDomain::symmetric_cube(3, 1.0).unwrap();
        assert_eq!(score_variance_sup(&g, &dom, 5).unwrap(), 0.25);
        assert!(score_variance_sup(&g, &dom, 1).is_ok());
        let b = StatModel::bernoulli(2).unwrap();
        assert!(score_variance_sup(&b, &ParamDomain::cube(2, 0.1, 0.5).unwrap(), 1).is_err());
        assert!(matches!(
            score_variance_sup(&b, &ParamDomain::cube(2, 0.0, 0.5).unwrap(), 3),
            Err(Error::SingularParameter { .. })
        ));
    }

    #[test]
    fn subgaussian_two_point_exact() {
        let b = StatModel::bernoulli(1).unwrap();
        let s2 = subgaussian_param_at(&b, &[0.5]).unwrap();
        // exact: 0.5 e^{4/σ²} + 0.5 e^{4/σ²} = e^{4/σ²} ≤ 2  ⇔  σ² ≥ 4 / ln 2
        assert_relative_eq!(s2, 4.0 / std::f64::consts::LN_2, max_relative = 1e-12);
        let m = b.subgaussian_moment(&[0.5], &[1.0], s2).unwrap();
        assert!(m <= 2.0 + 1e-9);
    }

    #[test]
    fn multinomial_has_no_subgaussian_certificate() {
        let m = StatModel::multinomial(2).unwrap();
        let dom = ParamDomain::multinomial_local(2).unwrap();
        assert!(matches!(subgaussian_param(&m, &dom), Err(Error::Unsupported(_))));
    }

    #[test]
    fn domain_validation() {
        assert!(ParamDomain::cube(2, 0.5, 0.5).is_err());
        assert!(ParamDomain::new(vec![(0.1, 0.6); 2], Some(SumConstraint::AtMost(1.0))).is_err());
        let dom = ParamDomain::sparse_bernoulli(4, 2.0).unwrap();
        assert_eq!(dom.sparsity(), Some(2.0));
        assert_eq!(dom.grid(9).unwrap().len(), 9);
        assert_eq!(ParamDomain::cube(2, 0.1, 0.2).unwrap().grid(17).unwrap().len(), 289);
        assert_relative_eq!(ParamDomain::symmetric_cube(3, 2.0).unwrap().half_width(), 2.0);
    }
}
