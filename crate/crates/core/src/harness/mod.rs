//! Seeded Monte Carlo risk sweeps and their reports.

mod verify;

pub use verify::{
    check_bound_fuzzing, check_dp_certification, check_interactive, check_trace_identity, check_yebarg_exactness, verify_all,
    CheckOutcome,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::make_yebarg;
use crate::error::{Error, Result};
use crate::estimators::{
    choose_w, gaussian_mean_estimate, s_sparse_two_phase_estimate, sparse_bernoulli_estimate, subsample_krr_pipeline,
    yebarg_tally, AffineEstimatorSpec, SparsePipelineConfig, SubsampleConfig, TwoPhaseConfig,
};
use crate::fisher::{certified_source_trace, minimax_lower_bound, van_trees_bound, Corollary, LowerBoundReport};
use crate::models::{sample_bits_into, sample_category, ParamDomain, StatModel};
use crate::rng::substream;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 13] = [
    "schema_version",
    "mechanism",
    "d",
    "s",
    "eps",
    "n",
    "trials",
    "risk_mean",
    "risk_stderr",
    "vt_bound",
    "rate_formula",
    "ratio",
    "seed",
];

/// Parameter point at which the risk is measured.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ThetaRule {
    /// Uniform over the d+1 categories (discrete) or θ_j = 1/d.
    Uniform,
    /// θ_j = s/(2d), the lower corner of the sparse local domain.
    #[default]
    HalfSparse,
    Constant { value: f64 },
    Explicit { values: Vec<f64> },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteMechanism {
    #[default]
    Yebarg,
    /// Unprivatized frequencies.
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// Distribution on d+1 categories.
    Discrete {
        #[serde(default)]
        mechanism: DiscreteMechanism,
        /// Subset size; chosen from (d+1, ε) when absent.
        #[serde(default)]
        w: Option<usize>,
        #[serde(default = "uniform_rule")]
        theta: ThetaRule,
    },
    /// Σθ ≤ 1 product Bernoulli through the reduction pipeline.
    SparseBernoulli {
        #[serde(default)]
        pipeline: SparsePipelineConfig,
        #[serde(default)]
        theta: ThetaRule,
    },
    /// s-sparse, two-phase grouping estimator.
    TwoPhase {
        #[serde(default)]
        config: TwoPhaseConfig,
        #[serde(default)]
        theta: ThetaRule,
    },
    /// s-sparse, subsampling + k-RR.
    Subsample {
        #[serde(default)]
        config: SubsampleConfig,
        #[serde(default)]
        theta: ThetaRule,
    },
    /// Gaussian location with the one-bit plumbing mechanism.
    Gaussian {
        #[serde(default = "one")]
        sigma0: f64,
        #[serde(default = "three")]
        clip: f64,
        #[serde(default = "one")]
        half_width: f64,
        #[serde(default = "zero_rule")]
        theta: ThetaRule,
    },
}

fn uniform_rule() -> ThetaRule {
    ThetaRule::Uniform
}

fn zero_rule() -> ThetaRule {
    ThetaRule::Constant { value: 0.0 }
}

fn one() -> f64 {
    1.0
}

fn three() -> f64 {
    3.0
}

fn default_s() -> Vec<f64> {
    vec![1.0]
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub scenario: Scenario,
    pub d: Vec<usize>,
    #[serde(default = "default_s")]
    pub s: Vec<f64>,
    pub eps: Vec<f64>,
    pub n: Vec<u64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Frozen constants C for "risk ≤ C·rate" checks, by mechanism name.
    #[serde(default)]
    pub calibration: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(format!("config {}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be ≥ 1".into()));
        }
        if self.d.is_empty() || self.eps.is_empty() || self.n.is_empty() || self.s.is_empty() {
            return Err(Error::Config("d, s, eps and n grids must be nonempty".into()));
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0)) {
            return Err(Error::Config(format!("ε must be > 0, got {e}")));
        }
        if let Some(s) = self.s.iter().find(|s| !(**s > 0.0)) {
            return Err(Error::Config(format!("s must be > 0, got {s}")));
        }
        if self.d.contains(&0) || self.n.contains(&0) {
            return Err(Error::Config("d and n must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn mechanism(&self) -> &'static str {
        self.scenario.mechanism()
    }

    /// Sweep rows in submission order: d, then s, then ε, then n.
    pub fn rows(&self) -> Vec<RowSpec> {
        let mut rows = Vec::new();
        for &d in &self.d {
            for &s in &self.s {
                for &eps in &self.eps {
                    for &n in &self.n {
                        rows.push(RowSpec { index: rows.len(), d, s, eps, n });
                    }
                }
            }
        }
        rows
    }
}

impl Scenario {
    pub fn mechanism(&self) -> &'static str {
        match self {
            Scenario::Discrete { mechanism: DiscreteMechanism::Yebarg, .. } => "yebarg",
            Scenario::Discrete { mechanism: DiscreteMechanism::Direct, .. } => "direct",
            Scenario::SparseBernoulli { .. } => "sparse_pipeline",
            Scenario::TwoPhase { .. } => "two_phase",
            Scenario::Subsample { .. } => "subsample_krr",
            Scenario::Gaussian { .. } => "gaussian_one_bit",
        }
    }

    fn theta_rule(&self) -> &ThetaRule {
        match self {
            Scenario::Discrete { theta, .. }
            | Scenario::SparseBernoulli { theta, .. }
            | Scenario::TwoPhase { theta, .. }
            | Scenario::Subsample { theta, .. }
            | Scenario::Gaussian { theta, .. } => theta,
        }
    }

    /// Model and the domain used for the van Trees bound.
    pub fn model_domain(&self, d: usize, s: f64) -> Result<(StatModel, ParamDomain)> {
        Ok(match *self {
            Scenario::Discrete { .. } => (StatModel::multinomial(d)?, ParamDomain::multinomial_local(d)?),
            Scenario::SparseBernoulli { .. } => (StatModel::bernoulli(d)?, ParamDomain::sparse_bernoulli(d, 1.0)?),
            Scenario::TwoPhase { .. } | Scenario::Subsample { .. } => {
                (StatModel::bernoulli(d)?, ParamDomain::sparse_bernoulli(d, s)?)
            }
            Scenario::Gaussian { sigma0, half_width, .. } => {
                (StatModel::gaussian(d, sigma0)?, ParamDomain::symmetric_cube(d, half_width)?)
            }
        })
    }

    /// The true parameter of a row. Discrete scenarios return all d+1
    /// category probabilities.
    pub fn theta(&self, d: usize, s: f64) -> Result<Vec<f64>> {
        let discrete = matches!(self, Scenario::Discrete { .. });
        let len = if discrete { d + 1 } else { d };
        let v = match self.theta_rule() {
            ThetaRule::Uniform if discrete => vec![1.0 / (d + 1) as f64; d + 1],
            ThetaRule::Uniform => vec![1.0 / d as f64; d],
            ThetaRule::HalfSparse if discrete => {
                let mut v = vec![1.0 / (2 * d) as f64; d];
                v.push(0.5);
                v
            }
            ThetaRule::HalfSparse => vec![s / (2 * d) as f64; d],
            ThetaRule::Constant { value } => vec![*value; len],
            ThetaRule::Explicit { values } => values.clone(),
        };
        if v.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: v.len() });
        }
        if discrete && (v.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("discrete θ must sum to 1 over the d+1 categories".into()));
        }
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowSpec {
    pub index: usize,
    pub d: usize,
    pub s: f64,
    pub eps: f64,
    pub n: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    /// Trial-averaged diagnostics (e.g. phase-1 failure frequency).
    pub diagnostics: BTreeMap<String, f64>,
}

/// Squared ℓ₂ error of one trial plus named diagnostics.
fn run_trial<R: Rng + ?Sized>(
    scenario: &Scenario,
    row: &RowSpec,
    theta: &[f64],
    rng: &mut R,
) -> Result<(f64, Vec<(&'static str, f64)>)> {
    let (d, eps, n) = (row.d, row.eps, row.n as usize);
    let sq = |est: &[f64]| est.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let supports = |rng: &mut R| -> Vec<Vec<usize>> {
        let mut bits = vec![0u8; d];
        (0..n)
            .map(|_| {
                sample_bits_into(theta, rng, &mut bits);
                (0..d).filter(|&j| bits[j] == 1).collect()
            })
            .collect()
    };
    Ok(match scenario {
        Scenario::Discrete { mechanism, w, .. } => {
            let free = &theta[..d];
            match mechanism {
                DiscreteMechanism::Direct => {
                    let mut counts = vec![0u64; d + 1];
                    for _ in 0..n {
                        counts[sample_category(free, rng)] += 1;
                    }
                    let est: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
                    (sq(&est), vec![])
                }
                DiscreteMechanism::Yebarg => {
                    let k = d + 1;
                    let w = w.unwrap_or_else(|| choose_w(k, eps));
                    let ch = make_yebarg(k, w, eps)?;
                    let inputs: Vec<usize> = (0..n).map(|_| sample_category(free, rng)).collect();
                    let tally = yebarg_tally(&ch, inputs, rng);
                    let est = AffineEstimatorSpec::yebarg(k, w, eps)?.apply(&tally.counts, tally.n)?;
                    (sq(&est), vec![("w", w as f64)])
                }
            }
        }
        Scenario::SparseBernoulli { pipeline, .. } => {
            let data = supports(rng);
            let est = sparse_bernoulli_estimate(&data, d, eps, pipeline, rng)?;
            let floored = (est.ps_hat == pipeline.ps_floor) as u8 as f64;
            (sq(&est.theta), vec![("ps_floor_hit", floored)])
        }
        Scenario::TwoPhase { config, .. } => {
            let data = supports(rng);
            let est = s_sparse_two_phase_estimate(&data, d, eps, config, rng)?;
            let failed = est.phase1_failed(theta) as u8 as f64;
            (sq(&est.theta), vec![("phase1_failure", failed), ("groups", est.groups.len() as f64)])
        }
        Scenario::Subsample { config, .. } => {
            let data = supports(rng);
            let est = subsample_krr_pipeline(&data, d, eps, config, rng)?;
            (sq(&est.theta), vec![("k", est.k as f64), ("mu_r", est.state.mu_r)])
        }
        Scenario::Gaussian { sigma0, clip, .. } => {
            let samples: Vec<Vec<f64>> = (0..n)
                .map(|_| theta.iter().map(|t| t + sigma0 * rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let est = gaussian_mean_estimate(&samples, *clip, eps, rng)?;
            (sq(&est), vec![])
        }
    })
}

/// Mean and standard error of ‖θ̂ − θ‖² over independent trials, each on its
/// own substream of `seed` selected by (row, trial).
pub fn empirical_risk(scenario: &Scenario, row: &RowSpec, trials: usize, seed: u64) -> Result<RiskEstimate> {
    if trials == 0 {
        return Err(Error::Config("trials must be ≥ 1".into()));
    }
    let theta = scenario.theta(row.d, row.s)?;
    let results: Vec<(f64, Vec<(&'static str, f64)>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, row.index as u64, t as u64);
            run_trial(scenario, row, &theta, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mean = results.iter().map(|r| r.0).sum::<f64>() / trials as f64;
    let stderr = if trials > 1 {
        let var = results.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    } else {
        f64::NAN
    };
    let mut diagnostics = BTreeMap::new();
    for (_, diag) in &results {
        for &(k, v) in diag {
            *diagnostics.entry(k.to_string()).or_insert(0.0) += v;
        }
    }
    diagnostics.values_mut().for_each(|v| *v /= trials as f64);
    Ok(RiskEstimate { mean, stderr, trials, diagnostics })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub mechanism: String,
    pub d: usize,
    pub s: f64,
    pub eps: f64,
    pub n: u64,
    pub trials: usize,
    pub risk_mean: f64,
    pub risk_stderr: f64,
    pub vt_bound: f64,
    pub rate_formula: f64,
    pub ratio: f64,
    pub seed: u64,
    pub corollary: Option<Corollary>,
    pub condition_ok: bool,
    pub diagnostics: BTreeMap<String, f64>,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub schema_version: u32,
    pub name: String,
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub wall_clock_s: f64,
    /// Rows are measurements of specific (mechanism, estimator) pairs at a
    /// fixed θ, i.e. upper-bound demonstrations, not minimax values.
    pub note: String,
}

/// Lower bound and rate for a row.
pub fn row_bounds(scenario: &Scenario, row: &RowSpec) -> Result<(f64, f64, Option<LowerBoundReport>)> {
    let (model, domain) = scenario.model_domain(row.d, row.s)?;
    if let Scenario::Discrete { mechanism: DiscreteMechanism::Direct, .. } = scenario {
        let sup = certified_source_trace(&model, &domain)?;
        let vt = van_trees_bound(row.d, row.n, sup, domain.half_width())?;
        let theta = scenario.theta(row.d, row.s)?;
        let rate = (1.0 - theta.iter().map(|p| p * p).sum::<f64>()) / row.n as f64;
        return Ok((vt.value, rate, None));
    }
    let lb = minimax_lower_bound(&model, &domain, row.n, row.eps)?;
    Ok((lb.van_trees_value, lb.rate, Some(lb)))
}

pub fn run_row(cfg: &ExperimentConfig, row: &RowSpec) -> Result<ReportRow> {
    let ctx = || format!("row {} (d={}, s={}, ε={}, n={})", row.index, row.d, row.s, row.eps, row.n);
    let start = Instant::now();
    let risk = empirical_risk(&cfg.scenario, row, cfg.trials, cfg.seed).map_err(|e| e.context(ctx()))?;
    let (vt, rate, lb) = row_bounds(&cfg.scenario, row).map_err(|e| e.context(ctx()))?;
    Ok(ReportRow {
        mechanism: cfg.mechanism().to_string(),
        d: row.d,
        s: row.s,
        eps: row.eps,
        n: row.n,
        trials: cfg.trials,
        risk_mean: risk.mean,
        risk_stderr: risk.stderr,
        vt_bound: vt,
        rate_formula: rate,
        ratio: risk.mean / rate,
        seed: cfg.seed,
        corollary: lb.as_ref().map(|l| l.corollary),
        condition_ok: lb.map(|l| l.condition_ok).unwrap_or(true),
        diagnostics: risk.diagnostics,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

pub fn run_rows(cfg: &ExperimentConfig) -> Result<RiskReport> {
    cfg.validate()?;
    let start = Instant::now();
    let rows = cfg.rows().iter().map(|r| run_row(cfg, r)).collect::<Result<Vec<_>>>()?;
    Ok(RiskReport {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        config: cfg.clone(),
        rows,
        wall_clock_s: start.elapsed().as_secs_f64(),
        note: "risks are measured for specific mechanism/estimator pairs at a fixed parameter; they demonstrate \
               upper bounds and are not minimax values"
            .into(),
    })
}

/// Runs the sweep and writes `<name>.csv` and `<name>.json` into `out_dir`
/// (or the config's `out`). The CSV holds no timing, so it depends only on
/// the config and seed.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<(RiskReport, Option<PathBuf>)> {
    let report = run_rows(cfg)?;
    let dir = out_dir.map(Path::to_path_buf).or_else(|| cfg.out.clone());
    if let Some(dir) = &dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
        let csv = dir.join(format!("{}.csv", cfg.name));
        std::fs::write(&csv, to_csv(&report.rows)).map_err(|e| Error::from(e).context(format!("writing {}", csv.display())))?;
        let json = dir.join(format!("{}.json", cfg.name));
        std::fs::write(&json, serde_json::to_string_pretty(&report)?)
            .map_err(|e| Error::from(e).context(format!("writing {}", json.display())))?;
    }
    Ok((report, dir))
}

pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            SCHEMA_VERSION,
            r.mechanism,
            r.d,
            r.s,
            r.eps,
            r.n,
            r.trials,
            r.risk_mean,
            r.risk_stderr,
            r.vt_bound,
            r.rate_formula,
            r.ratio,
            r.seed
        );
    }
    out
}

/// Fixed-width table for terminal output.
pub fn summary_table(rows: &[ReportRow]) -> String {
    let mut out = format!(
        "{:<16} {:>4} {:>5} {:>7} {:>9} {:>11} {:>10} {:>11} {:>11} {:>8}\n",
        "mechanism", "d", "s", "eps", "n", "risk", "stderr", "vt_bound", "rate", "ratio"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:>4} {:>5} {:>7.3} {:>9} {:>11.4e} {:>10.2e} {:>11.4e} {:>11.4e} {:>8.3}",
            r.mechanism, r.d, r.s, r.eps, r.n, r.risk_mean, r.risk_stderr, r.vt_bound, r.rate_formula, r.ratio
        );
    }
    out
}
