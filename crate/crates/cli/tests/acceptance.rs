//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ldp_core::channels::{make_subsample_krr, select_k, SubsampleKrrChannel};
use ldp_core::combin::binom_cumsum;
use ldp_core::estimators::{
    combine, f_map, g_map, mu_r_from_pmf, reduction_probs, subsample_krr_estimate, subsample_krr_estimate_known_r,
    SubsampleAggregatorState,
};
use ldp_core::harness::{
    check_bound_fuzzing, check_dp_certification, check_interactive, check_trace_identity, check_yebarg_exactness, run_rows,
    CheckOutcome, ExperimentConfig, ReportRow, RiskReport,
};

type Verdict = Result<(bool, String), String>;
type Criterion = (&'static str, Duration, fn() -> Verdict);

const SEED: u64 = 20_261_018;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn sweep(name: &str) -> Result<(ExperimentConfig, RiskReport), String> {
    let cfg = ExperimentConfig::load(&fixture(name)).map_err(|e| e.to_string())?;
    let report = run_rows(&cfg).map_err(|e| e.to_string())?;
    for r in &report.rows {
        eprintln!(
            "    {} d={} s={} eps={} n={}: risk {:.4e} ± {:.2e}, vt {:.4e}, rate {:.4e}, ratio {:.3} {:?}",
            r.mechanism, r.d, r.s, r.eps, r.n, r.risk_mean, r.risk_stderr, r.vt_bound, r.rate_formula, r.ratio, r.diagnostics
        );
    }
    Ok((cfg, report))
}

fn band(rows: &[ReportRow]) -> (f64, f64) {
    let lo = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    (lo, hi)
}

fn from_check(o: CheckOutcome) -> Verdict {
    let mut detail = format!("{} instances, worst {:.3e} (tol {:.0e})", o.instances, o.worst, o.tolerance);
    if !o.detail.is_empty() {
        detail = format!("{detail}; {}", o.detail);
    }
    Ok((o.passed, detail))
}

fn dp_certification() -> Verdict {
    from_check(check_dp_certification())
}

fn trace_identity() -> Verdict {
    from_check(check_trace_identity(SEED, 240))
}

fn bound_fuzzing() -> Verdict {
    from_check(check_bound_fuzzing(SEED, 500))
}

fn yebarg_exactness() -> Verdict {
    from_check(check_yebarg_exactness())
}

fn discrete_scaling() -> Verdict {
    let (_, rep) = sweep("discrete.toml")?;
    let (lo, hi) = band(&rep.rows);
    let below: Vec<String> = rep
        .rows
        .iter()
        .filter(|r| r.risk_mean < r.vt_bound - 3.0 * r.risk_stderr)
        .map(|r| format!("d={} ε={}", r.d, r.eps))
        .collect();
    let ok = rep.rows.len() == 9 && hi / lo <= 4.0 && below.is_empty();
    Ok((ok, format!("ratio band [{lo:.3}, {hi:.3}] width {:.2}x, rows below van Trees: {below:?}", hi / lo)))
}

/// Law of the f and g maps under the product Bernoulli law, by enumerating
/// {0,1}^d.
fn reduction_identities(theta: &[f64]) -> f64 {
    let d = theta.len();
    let (p, ps) = reduction_probs(theta);
    let mut pf = vec![0.0; d + 1];
    let mut pg = 0.0;
    for x in 0usize..1 << d {
        let support: Vec<usize> = (0..d).filter(|j| x >> j & 1 == 1).collect();
        let prob: f64 = (0..d).map(|j| if x >> j & 1 == 1 { theta[j] } else { 1.0 - theta[j] }).product();
        pf[f_map(&support, d)] += prob;
        pg += prob * g_map(&support) as f64;
    }
    let back = combine(&p, ps);
    let mut err = (pg - ps).abs();
    for i in 0..d {
        err = err.max((pf[i] - p[i]).abs()).max((back[i] - theta[i]).abs());
    }
    err
}

fn sparse_pipeline() -> Verdict {
    let thetas = [vec![1.0 / 16.0; 8], vec![0.02, 0.05, 0.1, 0.15, 0.01, 0.03, 0.07, 0.12], vec![0.3, 0.2, 0.45]];
    let ident = thetas.iter().map(|t| reduction_identities(t)).fold(0.0, f64::max);
    let (cfg, rep) = sweep("sparse.toml")?;
    let c = cfg.calibration.get("sparse_pipeline").copied().ok_or("missing calibration constant")?;
    let worst = band(&rep.rows).1;
    let ok = ident <= 1e-15 && rep.rows.iter().all(|r| r.risk_mean <= c * r.rate_formula);
    Ok((ok, format!("reduction identities max error {ident:.1e}; largest risk/rate {worst:.2} vs C = {c}")))
}

fn s_sparse_high() -> Verdict {
    let (cfg, rep) = sweep("two_phase.toml")?;
    let c = cfg.calibration.get("two_phase").copied().ok_or("missing calibration constant")?;
    let fail_freq = rep.rows.iter().map(|r| r.diagnostics.get("phase1_failure").copied().unwrap_or(f64::NAN)).fold(0.0, f64::max);
    let worst = band(&rep.rows).1;
    let ok = fail_freq <= 0.01 && rep.rows.iter().all(|r| r.risk_mean <= c * r.rate_formula);
    Ok((ok, format!("phase-1 failure frequency {fail_freq:.4}; risk/rate {worst:.2} vs C = {c}")))
}

/// E θ̂ − θ for both aggregators at d=4, k=2 by enumerating inputs and reports.
/// The μ_R aggregator gets the exact ratio of means, so its check uses an
/// exchangeable θ; the per-node-R aggregator is checked at an arbitrary θ.
fn subsample_unbiasedness() -> Result<f64, String> {
    let (d, k, eps) = (4usize, 2usize, 3.0);
    let ch = SubsampleKrrChannel::with_k(d, k, eps).map_err(|e| e.to_string())?;
    let kernel = ch.materialize().map_err(|e| e.to_string())?;
    let supports = kernel.output_supports().to_vec();
    let mut worst: f64 = 0.0;
    for (theta, exchangeable) in [(vec![0.2; 4], true), (vec![0.1, 0.35, 0.2, 0.05], false)] {
        let mut pmf = vec![0.0; d + 1];
        let mut mean_mu = vec![0.0; d];
        let mut mean_known = vec![0.0; d];
        let law: Vec<f64> =
            (0usize..1 << d).map(|x| (0..d).map(|j| if x >> j & 1 == 1 { theta[j] } else { 1.0 - theta[j] }).product()).collect();
        for (x, px) in law.iter().enumerate() {
            pmf[x.count_ones() as usize] += px;
        }
        let mu = mu_r_from_pmf(pmf, k);
        let state = SubsampleAggregatorState { a: ch.a(), b: ch.b(), mu_r: mu.ratio, m: 0 };
        for (x, px) in law.iter().enumerate() {
            let r = (x.count_ones() as f64).max(k as f64) / k as f64;
            for (y, s) in supports.iter().enumerate() {
                let w = px * kernel.prob(x, y);
                if w == 0.0 {
                    continue;
                }
                let known = subsample_krr_estimate_known_r(&[(s.clone(), r)], d, ch.a(), ch.b()).map_err(|e| e.to_string())?;
                let scaled = subsample_krr_estimate(std::slice::from_ref(s), d, &state).map_err(|e| e.to_string())?;
                for i in 0..d {
                    mean_known[i] += w * known[i];
                    mean_mu[i] += w * scaled[i];
                }
            }
        }
        for i in 0..d {
            worst = worst.max((mean_known[i] - theta[i]).abs());
            if exchangeable {
                worst = worst.max((mean_mu[i] - theta[i]).abs());
            }
        }
    }
    Ok(worst)
}

fn s_sparse_low() -> Verdict {
    let (d, eps, slack) = (32usize, 45.0f64, 10.0f64);
    let level = select_k(d, eps, slack).map_err(|e| e.to_string())?;
    let ch = make_subsample_krr(d, eps, slack).map_err(|e| e.to_string())?;
    let budget = (eps - slack * (d as f64).ln()).exp();
    let cum_ok = binom_cumsum(d, 3) <= budget && binom_cumsum(d, 4) > budget && binom_cumsum(d, 3) == 5489.0;
    let k_ok = level.k == 3 && ch.k() == 3 && cum_ok;
    let bias = subsample_unbiasedness()?;
    let (_, rep) = sweep("subsample.toml")?;
    let (lo, hi) = band(&rep.rows);
    let ok = k_ok && bias <= 1e-12 && rep.rows.len() == 3 && hi / lo <= 4.0;
    Ok((
        ok,
        format!(
            "k = {} (N = {}, budget e^(ε−slack·ln d) = {budget:.0}); exact bias {bias:.1e}; ratio band [{lo:.3}, {hi:.3}] width {:.2}x",
            level.k,
            binom_cumsum(d, level.k),
            hi / lo
        ),
    ))
}

fn interactive() -> Verdict {
    from_check(check_interactive(SEED))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_ldp-fisher");
    let mut csvs = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let status = Command::new(bin)
            .args(["simulate", "--config"])
            .arg(fixture("determinism.toml"))
            .args(["--seed", "4242", "--threads", threads, "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        csvs.push(std::fs::read(out.join("determinism.csv")).map_err(|e| e.to_string())?);
    }
    let ok = csvs[0] == csvs[1] && csvs[0] == csvs[2] && !csvs[0].is_empty();
    Ok((ok, format!("{} bytes, identical across two runs and across 1/3 threads: {ok}", csvs[0].len())))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("dp_certification", Duration::from_secs(10), dp_certification),
        ("trace_identity", Duration::from_secs(60), trace_identity),
        ("bound_fuzzing", Duration::from_secs(300), bound_fuzzing),
        ("yebarg_exactness", Duration::from_secs(30), yebarg_exactness),
        ("discrete_scaling", Duration::from_secs(600), discrete_scaling),
        ("sparse_pipeline", Duration::from_secs(600), sparse_pipeline),
        ("s_sparse_high_privacy", Duration::from_secs(900), s_sparse_high),
        ("s_sparse_low_privacy", Duration::from_secs(900), s_sparse_low),
        ("interactive_suite", Duration::from_secs(60), interactive),
        ("determinism", Duration::from_secs(60), determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let verdict = f();
        let took = start.elapsed();
        let (ok, detail) = match verdict {
            Ok((ok, detail)) => (ok && took <= limit, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name} ({:.1}s, limit {}s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
