use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{make_yebarg, SubsetScratch, YeBargChannel};
use crate::error::{Error, Result};

/// Subset size for the subset-selection mechanism: round(d/(e^ε+1)) clamped to
/// [1, d−1], and 1 once e^ε ≥ d.
pub fn choose_w(d: usize, eps: f64) -> usize {
    assert!(d >= 2, "choose_w needs d ≥ 2");
    let e = eps.exp();
    if e >= d as f64 {
        return 1;
    }
    ((d as f64 / (e + 1.0)).round() as usize).clamp(1, d - 1)
}

/// p̂_i = slope·T_i/n − intercept, T_i the number of reports containing i.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineEstimatorSpec {
    pub slope: f64,
    pub intercept: f64,
}

impl AffineEstimatorSpec {
    /// Inverse of the per-coordinate report marginal
    /// P(i ∈ Y) = (π_in − π_out) p_i + π_out.
    pub fn yebarg(d: usize, w: usize, eps: f64) -> Result<Self> {
        let ch = make_yebarg(d, w, eps)?;
        if eps == 0.0 {
            return Err(Error::invalid("ε = 0 reports carry no information to invert"));
        }
        let (d, w, e) = (d as f64, w as f64, eps.exp());
        let slope = (d - 1.0) * (e * w + d - w) / (w * (d - w) * (e - 1.0));
        let intercept = ((w - 1.0) * e + d - w) / ((d - w) * (e - 1.0));
        debug_assert!((slope * (ch.include_prob() - ch.cross_prob()) - 1.0).abs() < 1e-9);
        Ok(AffineEstimatorSpec { slope, intercept })
    }

    pub fn apply(&self, counts: &[u64], n: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::EmptyReports);
        }
        Ok(counts.iter().map(|&t| self.slope * t as f64 / n as f64 - self.intercept).collect())
    }
}

/// Per-coordinate report counts T_i.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetTally {
    pub counts: Vec<u64>,
    pub n: u64,
}

impl SubsetTally {
    pub fn new(d: usize) -> Self {
        SubsetTally { counts: vec![0; d], n: 0 }
    }

    pub fn add(&mut self, report: &[usize]) {
        for &i in report {
            self.counts[i] += 1;
        }
        self.n += 1;
    }
}

pub fn yebarg_estimate(reports: &[Vec<usize>], d: usize, w: usize, eps: f64) -> Result<Vec<f64>> {
    let mut tally = SubsetTally::new(d);
    for r in reports {
        if r.len() != w || r.iter().any(|&i| i >= d) {
            return Err(Error::invalid(format!("report {r:?} is not a weight-{w} subset of 0..{d}")));
        }
        tally.add(r);
    }
    AffineEstimatorSpec::yebarg(d, w, eps)?.apply(&tally.counts, tally.n)
}

/// Privatizes each category with the subset mechanism and tallies the reports.
pub fn yebarg_tally<R: Rng + ?Sized>(ch: &YeBargChannel, inputs: impl IntoIterator<Item = usize>, rng: &mut R) -> SubsetTally {
    let mut tally = SubsetTally::new(ch.d());
    let mut scratch = SubsetScratch::new(ch.d());
    for x in inputs {
        tally.add(ch.sample_into(x, rng, &mut scratch));
    }
    tally
}

fn check_risk_args(d: usize, w: usize, eps: f64, n: u64) -> Result<()> {
    if w == 0 || w >= d {
        return Err(Error::invalid(format!("need 1 ≤ w ≤ d−1, got w={w}, d={d}")));
    }
    if !(eps > 0.0) || n == 0 {
        return Err(Error::invalid(format!("need ε > 0 and n ≥ 1, got ε={eps}, n={n}")));
    }
    Ok(())
}

/// Exact E‖p̂ − p‖² of [`yebarg_estimate`]:
/// (1/n)[(w(d−2)+1)e^{2ε}/((d−w)(e^ε−1)²) + 2(d−2)e^ε/(e^ε−1)²
///       + ((d−2)(d−w)+1)/(w(e^ε−1)²) − Σp²].
pub fn yebarg_risk_formula(d: usize, w: usize, eps: f64, n: u64, sum_p_sq: f64) -> Result<f64> {
    check_risk_args(d, w, eps, n)?;
    let (d, w, e) = (d as f64, w as f64, eps.exp());
    let em1 = (e - 1.0) * (e - 1.0);
    let v = (w * (d - 2.0) + 1.0) * e * e / ((d - w) * em1)
        + 2.0 * (d - 2.0) * e / em1
        + ((d - 2.0) * (d - w) + 1.0) / (w * em1)
        - sum_p_sq;
    Ok(v / n as f64)
}

/// The same expression with the middle term written as 2(d−2)/(e^ε−1)².
/// It understates the exact risk by 2(d−2)/((e^ε−1)n).
pub fn yebarg_risk_formula_printed(d: usize, w: usize, eps: f64, n: u64, sum_p_sq: f64) -> Result<f64> {
    check_risk_args(d, w, eps, n)?;
    let gap = 2.0 * (d as f64 - 2.0) / (eps.exp() - 1.0) / n as f64;
    Ok(yebarg_risk_formula(d, w, eps, n, sum_p_sq)? - gap)
}
