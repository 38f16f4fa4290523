//! Exact-oracle checks run by the `verify` subcommand and the acceptance suite.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{make_krr, make_yebarg, random_ldp_channel, validate_eps, SubsampleKrrChannel};
use crate::error::Result;
use crate::estimators::{yebarg_risk_formula, yebarg_risk_formula_printed, AffineEstimatorSpec};
use crate::fisher::{fisher_bound, trace_fisher_exact, variance_bound, FisherBoundKind};
use crate::models::{subgaussian_param_at, StatModel};
use crate::oracle::{exact_affine_estimator_moments, finite_diff_trace};
use crate::protocols::{transcript_fisher, BiasFlip, BudgetSplit, Constant, NodeStrategy, RandomAdaptive};
use crate::rng::substream;

pub const FUZZ_EPS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub instances: usize,
    /// Largest observed discrepancy, in the units of the check's tolerance.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} instances, worst {:.3e} (tol {:.0e}) in {:.2}s{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.instances,
            self.worst,
            self.tolerance,
            self.seconds,
            if self.detail.is_empty() { String::new() } else { format!("; {}", self.detail) }
        )
    }
}

struct Tracker {
    start: Instant,
    instances: usize,
    worst: f64,
    failures: Vec<String>,
}

impl Tracker {
    fn new() -> Self {
        Tracker { start: Instant::now(), instances: 0, worst: 0.0, failures: Vec::new() }
    }

    fn record(&mut self, err: f64, tol: f64, what: impl FnOnce() -> String) {
        self.instances += 1;
        let err = if err.is_nan() { f64::INFINITY } else { err };
        self.worst = self.worst.max(err);
        if err > tol && self.failures.len() < 5 {
            self.failures.push(what());
        }
    }

    fn fail(&mut self, what: String) {
        self.instances += 1;
        self.worst = f64::INFINITY;
        if self.failures.len() < 5 {
            self.failures.push(what);
        }
    }

    fn finish(self, name: &str, tol: f64, extra: String) -> CheckOutcome {
        let passed = self.failures.is_empty() && self.worst <= tol;
        let mut detail = extra;
        if !self.failures.is_empty() {
            if !detail.is_empty() {
                detail.push_str("; ");
            }
            detail.push_str(&self.failures.join(" | "));
        }
        CheckOutcome {
            name: name.to_string(),
            passed,
            instances: self.instances,
            worst: self.worst,
            tolerance: tol,
            detail,
            seconds: self.start.elapsed().as_secs_f64(),
        }
    }
}

fn certify(t: &mut Tracker, label: String, rows: Result<Vec<Vec<f64>>>, eps: f64) {
    match rows.and_then(|r| validate_eps(&r)) {
        Ok(star) => t.record((star - eps).max(0.0), 1e-12, || format!("{label}: ε* = {star}")),
        Err(e) => t.fail(format!("{label}: {e}")),
    }
}

/// ε* of every materialized k-RR, subset-selection and subsample+k-RR kernel
/// stays within its nominal ε.
pub fn check_dp_certification() -> CheckOutcome {
    let mut t = Tracker::new();
    let eps_grid = [0.01, 0.1, 0.5, 1.0, 2f64.ln(), 2.0, 5.0, 10.0];
    for &eps in &eps_grid {
        for k in 2..=10 {
            certify(&mut t, format!("k-RR k={k} ε={eps}"), make_krr(k, eps).and_then(|c| c.materialize()).map(|c| c.rows()), eps);
        }
        for d in 2..=6 {
            for w in 1..d {
                certify(
                    &mut t,
                    format!("subset d={d} w={w} ε={eps}"),
                    make_yebarg(d, w, eps).and_then(|c| c.materialize()).map(|c| c.rows()),
                    eps,
                );
            }
        }
        for d in 2..=4 {
            for k in 1..=d {
                certify(
                    &mut t,
                    format!("subsample+k-RR d={d} k={k} ε={eps}"),
                    SubsampleKrrChannel::with_k(d, k, eps).and_then(|c| c.materialize()).map(|c| c.rows()),
                    eps,
                );
            }
        }
    }
    t.finish("dp_certification", 1e-12, String::new())
}

/// Interior parameter point with every coordinate (and the implied last
/// category) at least ~0.08.
fn random_theta<R: Rng + ?Sized>(model: &StatModel, rng: &mut R) -> Vec<f64> {
    match *model {
        StatModel::BernoulliProduct { d } => (0..d).map(|_| rng.random_range(0.1..0.9)).collect(),
        StatModel::Multinomial { d } => {
            let w: Vec<f64> = (0..=d).map(|_| rng.random_range(0.5..1.5)).collect();
            let total: f64 = w.iter().sum();
            w[..d].iter().map(|v| v / total).collect()
        }
        StatModel::GaussianLocation { d, .. } => vec![0.0; d],
    }
}

fn random_finite_model<R: Rng + ?Sized>(rng: &mut R) -> StatModel {
    let d = rng.random_range(1..=3);
    if rng.random::<bool>() {
        StatModel::BernoulliProduct { d }
    } else {
        StatModel::Multinomial { d }
    }
}

/// The Fisher trace from conditional scores against finite differences of the
/// output log-likelihood, on random channels with |X|, |Y| ≤ 30 and d ≤ 3.
pub fn check_trace_identity(seed: u64, instances: usize) -> CheckOutcome {
    let mut t = Tracker::new();
    let tol = 1e-6;
    for i in 0..instances {
        let mut rng = substream(seed, 2, i as u64);
        let model = random_finite_model(&mut rng);
        let nx = model.alphabet_size().unwrap_or(2);
        let ny = rng.random_range(2..=30);
        let eps = [0.1, 0.5, 1.0, 2.0, 5.0][i % 5];
        let theta = random_theta(&model, &mut rng);
        let res = random_ldp_channel(nx, ny, eps, &mut rng).and_then(|ch| {
            Ok((trace_fisher_exact(&model, &ch, &theta)?, finite_diff_trace(&model, &ch, &theta, 1e-4)?))
        });
        match res {
            Ok((exact, fd)) => {
                let rel = (exact - fd).abs() / exact.abs().max(1e-300);
                t.record(rel, tol, || format!("{} θ={theta:?} |Y|={ny}: {exact} vs {fd}", model.name()));
            }
            Err(e) => t.fail(format!("{} θ={theta:?}: {e}", model.name())),
        }
    }
    t.finish("trace_identity", tol, String::new())
}

/// Tr I_Y against min{I₀(e^ε−1)², I₀e^ε} and, for Bernoulli models at ε ≥ 1,
/// against 2σ²ε with σ² certified at θ. `worst` is the largest ratio
/// trace/bound, so the check passes at ≤ 1.
pub fn check_bound_fuzzing(seed: u64, channels_per_eps: usize) -> CheckOutcome {
    let mut t = Tracker::new();
    let tol = 1.0 + 1e-9;
    let (mut sg_checked, mut sg_worst) = (0usize, 0.0f64);
    for (ei, &eps) in FUZZ_EPS.iter().enumerate() {
        for c in 0..channels_per_eps {
            let mut rng = substream(seed, 3 + ei as u64, c as u64);
            let model = random_finite_model(&mut rng);
            let nx = model.alphabet_size().unwrap_or(2);
            let ny = rng.random_range(2..=12);
            let theta = random_theta(&model, &mut rng);
            let res = (|| -> Result<(f64, f64, Option<f64>)> {
                let ch = random_ldp_channel(nx, ny, eps, &mut rng)?;
                let tr = trace_fisher_exact(&model, &ch, &theta)?;
                let i0 = model.score_variance_at(&theta)?;
                let sg = match model {
                    StatModel::BernoulliProduct { .. } if eps >= 1.0 => {
                        let s2 = subgaussian_param_at(&model, &theta)?;
                        if subgaussian_certified(&model, &theta, s2, &mut rng)? {
                            Some(fisher_bound(FisherBoundKind::Subgaussian(s2), eps)?)
                        } else {
                            None
                        }
                    }
                    _ => None,
                };
                Ok((tr, variance_bound(i0, eps)?, sg))
            })();
            match res {
                Ok((tr, vb, sg)) => {
                    t.record(tr / vb, tol, || format!("{} ε={eps} θ={theta:?}: trace {tr} > {vb}", model.name()));
                    if let Some(b) = sg {
                        sg_checked += 1;
                        sg_worst = sg_worst.max(tr / b);
                        t.record(tr / b, tol, || format!("{} ε={eps} θ={theta:?}: trace {tr} > 2σ²ε = {b}", model.name()));
                    }
                }
                Err(e) => t.fail(format!("{} ε={eps}: {e}", model.name())),
            }
        }
    }
    t.finish("bound_fuzzing", tol, format!("{sg_checked} sub-Gaussian comparisons, worst ratio {sg_worst:.3}"))
}

/// E exp((⟨u,S⟩/σ)²) ≤ 2 on the coordinate axes, the diagonal and random
/// unit directions.
fn subgaussian_certified<R: Rng + ?Sized>(model: &StatModel, theta: &[f64], s2: f64, rng: &mut R) -> Result<bool> {
    let d = model.dim();
    let mut dirs: Vec<Vec<f64>> = (0..d).map(|j| (0..d).map(|i| (i == j) as u8 as f64).collect()).collect();
    dirs.push(vec![1.0; d]);
    for _ in 0..16 {
        dirs.push((0..d).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    for mut u in dirs {
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        u.iter_mut().for_each(|v| *v /= norm);
        if model.subgaussian_moment(theta, &u, s2)? > 2.0 + 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Bias and MSE of the subset-selection estimator by exact enumeration of the
/// report marginal, against the closed-form risk.
pub fn check_yebarg_exactness() -> CheckOutcome {
    let mut t = Tracker::new();
    let tol = 1e-12;
    let mut printed_gap: f64 = 0.0;
    for d in [3usize, 4, 5] {
        for w in [1usize, 2] {
            for eps in [2f64.ln(), 1.0, 2.0] {
                let skewed: Vec<f64> = {
                    let raw: Vec<f64> = (1..=d).map(|i| i as f64).collect();
                    let s: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / s).collect()
                };
                for p in [vec![1.0 / d as f64; d], skewed] {
                    for n in [1u64, 10, 1000] {
                        let label = format!("d={d} w={w} ε={eps:.4} n={n}");
                        let res = (|| -> Result<(f64, f64, f64, f64)> {
                            let ch = make_yebarg(d, w, eps)?.materialize()?;
                            let spec = AffineEstimatorSpec::yebarg(d, w, eps)?;
                            let mo = exact_affine_estimator_moments(&ch, &p, &p, spec.slope, spec.intercept, n)?;
                            let sq: f64 = p.iter().map(|v| v * v).sum();
                            let bias = mo.bias.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                            Ok((
                                bias,
                                mo.mse,
                                yebarg_risk_formula(d, w, eps, n, sq)?,
                                yebarg_risk_formula_printed(d, w, eps, n, sq)?,
                            ))
                        })();
                        match res {
                            Ok((bias, mse, formula, printed)) => {
                                t.record(bias, tol, || format!("{label}: bias {bias}"));
                                let rel = (mse - formula).abs() / formula;
                                t.record(rel, tol, || format!("{label}: mse {mse} vs {formula}"));
                                printed_gap = printed_gap.max((mse - printed).abs() / mse);
                            }
                            Err(e) => t.fail(format!("{label}: {e}")),
                        }
                    }
                }
            }
        }
    }
    t.finish(
        "yebarg_exactness",
        tol,
        format!("largest relative gap to the 2(d−2)/(e^ε−1)² variant: {printed_gap:.3}"),
    )
}

/// Label, model, θ, rounds and node strategies.
type Toy = (String, StatModel, Vec<f64>, usize, Vec<Box<dyn NodeStrategy>>);

fn toy_protocols(seed: u64) -> Result<Vec<Toy>> {
    let mut out = Vec::new();
    for eps in [0.5, 1.0, 2.0] {
        for (mi, model) in [StatModel::bernoulli(1)?, StatModel::multinomial(2)?, StatModel::bernoulli(2)?].into_iter().enumerate() {
            let nx = model.alphabet_size().unwrap_or(2);
            let theta = match model {
                StatModel::Multinomial { .. } => vec![0.25, 0.4],
                StatModel::BernoulliProduct { d } => (0..d).map(|j| 0.3 + 0.2 * j as f64).collect(),
                StatModel::GaussianLocation { d, .. } => vec![0.0; d],
            };
            let krr = make_krr(nx, eps)?.materialize()?;
            for n in [2usize, 3] {
                let constant: Vec<Box<dyn NodeStrategy>> =
                    (0..n).map(|_| Box::new(Constant { channel: krr.clone() }) as Box<dyn NodeStrategy>).collect();
                out.push((format!("constant n={n} {} ε={eps}", model.name()), model.clone(), theta.clone(), 1, constant));
                let flip: Vec<Box<dyn NodeStrategy>> = (0..n)
                    .map(|i| Ok(Box::new(BiasFlip::new(krr.clone(), i % nx)?) as Box<dyn NodeStrategy>))
                    .collect::<Result<_>>()?;
                out.push((format!("bias_flip n={n} {} ε={eps}", model.name()), model.clone(), theta.clone(), 1, flip));
                let rounds = if n == 2 && nx <= 3 { 2 } else { 1 };
                let adaptive: Vec<Box<dyn NodeStrategy>> = (0..n)
                    .map(|i| {
                        Box::new(RandomAdaptive {
                            eps,
                            rounds,
                            n_inputs: nx,
                            n_outputs: 3,
                            seed: seed ^ ((mi * 16 + n * 4 + i) as u64),
                        }) as Box<dyn NodeStrategy>
                    })
                    .collect();
                out.push((format!("random_adaptive n={n} T={rounds} {} ε={eps}", model.name()), model.clone(), theta.clone(), rounds, adaptive));
                if nx <= 3 {
                    let split: Vec<Box<dyn NodeStrategy>> = (0..n)
                        .map(|_| Ok(Box::new(BudgetSplit::new(nx, eps, 2)?) as Box<dyn NodeStrategy>))
                        .collect::<Result<_>>()?;
                    out.push((format!("budget_split n={n} T=2 {} ε={eps}", model.name()), model.clone(), theta.clone(), 2, split));
                }
            }
        }
    }
    Ok(out)
}

/// Chain rule and the n·I₀(e^ε−1)² cap on enumerated transcripts of small
/// sequential and blackboard protocols. Trace/cap ratios above 1 are reported
/// as violations alongside the chain-rule residuals.
pub fn check_interactive(seed: u64) -> CheckOutcome {
    let mut t = Tracker::new();
    let tol = 1e-10;
    let mut worst_ratio: f64 = 0.0;
    match toy_protocols(seed) {
        Ok(protocols) => {
            for (label, model, theta, rounds, strats) in protocols {
                let eps = strats.iter().map(|s| s.eps()).fold(0.0, f64::max);
                let res = (|| -> Result<(f64, f64, f64)> {
                    let tf = transcript_fisher(&strats, rounds, &model, &theta)?;
                    let i0 = model.score_variance_at(&theta)?;
                    let cap = strats.len() as f64 * fisher_bound(FisherBoundKind::VarianceQuadratic(i0), eps)?;
                    Ok((tf.trace, tf.chain_sum, cap))
                })();
                match res {
                    Ok((trace, chain, cap)) => {
                        t.record((trace - chain).abs(), tol, || format!("{label}: {trace} vs chain {chain}"));
                        worst_ratio = worst_ratio.max(trace / cap);
                        if trace > cap * (1.0 + 1e-12) {
                            t.fail(format!("{label}: trace {trace} > n·I₀(e^ε−1)² = {cap}"));
                        }
                    }
                    Err(e) => t.fail(format!("{label}: {e}")),
                }
            }
        }
        Err(e) => t.fail(format!("building protocols: {e}")),
    }
    t.finish("interactive", tol, format!("largest trace / n·I₀(e^ε−1)² = {worst_ratio:.3}"))
}

/// Criteria 1–4 and 9 at their full sizes.
pub fn verify_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        check_dp_certification(),
        check_trace_identity(seed, 240),
        check_bound_fuzzing(seed, 500),
        check_yebarg_exactness(),
        check_interactive(seed),
    ]
}
