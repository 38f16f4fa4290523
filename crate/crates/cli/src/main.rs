use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ldp_core::channels::{make_binary_rr, make_krr, make_yebarg, FiniteChannel, SubsampleKrrChannel};
use ldp_core::fisher::{
    fisher_bound, minimax_lower_bound, source_trace, trace_fisher_exact, variance_bound, FisherBoundKind,
    LowerBoundReport,
};
use ldp_core::harness::{
    check_bound_fuzzing, check_dp_certification, check_interactive, check_trace_identity, check_yebarg_exactness,
    row_bounds, run_experiment, summary_table, CheckOutcome, ExperimentConfig,
};
use ldp_core::models::{subgaussian_param_at, ParamDomain, StatModel};
use ldp_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "ldp-fisher", version, about = "Fisher information bounds and risk sweeps for locally private estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML or JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// van Trees lower bounds and corollary rates.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: Option<BoundModel>,
        #[arg(long, value_delimiter = ',')]
        d: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        s: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<u64>,
    },
    /// Exact Fisher trace of a privatized sample and its ε bounds.
    Fisher {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        query: FisherFlags,
    },
    /// Monte Carlo risk sweep; writes <name>.csv and <name>.json.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Exact-oracle verification suite.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BoundModel {
    Discrete,
    SparseBernoulli,
    SSparse,
    Gaussian,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelKind {
    Bernoulli,
    Multinomial,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ChannelKind {
    Krr,
    BinaryRr,
    Yebarg,
    SubsampleKrr,
    Identity,
}

#[derive(Args, Debug, Clone, Default)]
struct FisherFlags {
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long = "dim")]
    dim: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Vec<f64>,
    #[arg(long, value_enum)]
    channel: Option<ChannelKind>,
    #[arg(long = "epsilon")]
    epsilon: Option<f64>,
    /// Alphabet size for k-RR, or the subsampling level.
    #[arg(long)]
    k: Option<usize>,
    /// Subset size for the subset-selection mechanism.
    #[arg(long)]
    w: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FisherQuery {
    model: ModelKind,
    d: usize,
    theta: Vec<f64>,
    channel: ChannelKind,
    eps: f64,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    w: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
struct FisherReport {
    query: FisherQuery,
    eps_star: f64,
    trace: f64,
    source_trace: f64,
    i0: f64,
    variance_bound: f64,
    subgaussian_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
struct BoundRow {
    model: String,
    d: usize,
    s: f64,
    eps: f64,
    n: u64,
    vt_bound: f64,
    rate: f64,
    report: Option<LowerBoundReport>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn write_json(dir: &Path, file: &str, value: &impl Serialize) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
    let path = dir.join(file);
    std::fs::write(&path, serde_json::to_string_pretty(value)?)
        .map_err(|e| Error::from(e).context(format!("writing {}", path.display())))?;
    Ok(path)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))
}

fn parse_any<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { common } => simulate(common),
        Command::Verify { common } => verify(common),
        Command::Fisher { common, query } => fisher(common, query),
        Command::Bounds { common, model, d, s, eps, n } => bounds(common, model, d, s, eps, n),
    }
}

fn simulate(common: Common) -> Result<bool> {
    init_threads(common.threads)?;
    let path = common.config.ok_or_else(|| Error::Config("simulate needs --config".into()))?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let (report, dir) = run_experiment(&cfg, common.out.as_deref())?;
    print!("{}", summary_table(&report.rows));
    if let Some(dir) = dir {
        println!("wrote {}", dir.join(format!("{}.csv", cfg.name)).display());
    }
    Ok(true)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_trace")]
    trace_instances: usize,
    #[serde(default = "default_fuzz")]
    fuzz_channels_per_eps: usize,
}

fn default_trace() -> usize {
    240
}

fn default_fuzz() -> usize {
    500
}

fn verify(common: Common) -> Result<bool> {
    init_threads(common.threads)?;
    let mut vc = match &common.config {
        Some(p) => parse_any::<VerifyConfig>(&read_text(p)?)?,
        None => VerifyConfig { seed: 0, trace_instances: default_trace(), fuzz_channels_per_eps: default_fuzz() },
    };
    if let Some(seed) = common.seed {
        vc.seed = seed;
    }
    let jobs: Vec<Box<dyn Fn() -> CheckOutcome + Send + Sync>> = vec![
        Box::new(check_dp_certification),
        Box::new(move || check_trace_identity(vc.seed, vc.trace_instances)),
        Box::new(move || check_bound_fuzzing(vc.seed, vc.fuzz_channels_per_eps)),
        Box::new(check_yebarg_exactness),
        Box::new(move || check_interactive(vc.seed)),
    ];
    let mut outcomes = Vec::new();
    for job in jobs {
        let o = job();
        println!("{}", o.line());
        outcomes.push(o);
    }
    if let Some(dir) = &common.out {
        write_json(dir, "verify.json", &outcomes)?;
    }
    Ok(outcomes.iter().all(|o| o.passed))
}

fn fisher(common: Common, flags: FisherFlags) -> Result<bool> {
    init_threads(common.threads)?;
    let query = match &common.config {
        Some(p) => {
            let mut q: FisherQuery = parse_any(&read_text(p)?)?;
            merge_flags(&mut q, &flags);
            q
        }
        None => FisherQuery {
            model: flags.model.ok_or_else(|| Error::Config("--model is required without --config".into()))?,
            d: flags.dim.unwrap_or(flags.theta.len().max(1)),
            theta: flags.theta.clone(),
            channel: flags.channel.ok_or_else(|| Error::Config("--channel is required without --config".into()))?,
            eps: flags.epsilon.ok_or_else(|| Error::Config("--epsilon is required without --config".into()))?,
            k: flags.k,
            w: flags.w,
        },
    };
    let report = fisher_report(query)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(dir) = &common.out {
        write_json(dir, "fisher.json", &report)?;
    }
    Ok(true)
}

fn merge_flags(q: &mut FisherQuery, f: &FisherFlags) {
    if let Some(m) = f.model {
        q.model = m;
    }
    if let Some(d) = f.dim {
        q.d = d;
    }
    if !f.theta.is_empty() {
        q.theta = f.theta.clone();
    }
    if let Some(c) = f.channel {
        q.channel = c;
    }
    if let Some(e) = f.epsilon {
        q.eps = e;
    }
    q.k = f.k.or(q.k);
    q.w = f.w.or(q.w);
}

fn build_channel(q: &FisherQuery, nx: usize) -> Result<FiniteChannel> {
    let need = |v: Option<usize>, name: &str| v.ok_or_else(|| Error::Config(format!("--{name} is required for {:?}", q.channel)));
    match q.channel {
        ChannelKind::Krr => make_krr(q.k.unwrap_or(nx), q.eps)?.materialize(),
        ChannelKind::BinaryRr => make_binary_rr(q.eps)?.materialize(),
        ChannelKind::Yebarg => make_yebarg(nx, need(q.w, "w")?, q.eps)?.materialize(),
        ChannelKind::SubsampleKrr => SubsampleKrrChannel::with_k(q.d, need(q.k, "k")?, q.eps)?.materialize(),
        ChannelKind::Identity => FiniteChannel::identity(nx),
    }
}

fn fisher_report(query: FisherQuery) -> Result<FisherReport> {
    let model = match query.model {
        ModelKind::Bernoulli => StatModel::bernoulli(query.d)?,
        ModelKind::Multinomial => StatModel::multinomial(query.d)?,
    };
    if query.theta.len() != query.d {
        return Err(Error::DimensionMismatch { expected: query.d, got: query.theta.len() });
    }
    let nx = model.alphabet_size().ok_or_else(|| Error::Unsupported("model has no finite alphabet".into()))?;
    let ch = build_channel(&query, nx)?;
    let theta = &query.theta;
    let trace = trace_fisher_exact(&model, &ch, theta)?;
    let i0 = model.score_variance_at(theta)?;
    let eps = ch.eps_nominal();
    let subgaussian_bound = match model {
        StatModel::BernoulliProduct { .. } if eps >= 1.0 => {
            Some(fisher_bound(FisherBoundKind::Subgaussian(subgaussian_param_at(&model, theta)?), eps)?)
        }
        _ => None,
    };
    Ok(FisherReport {
        eps_star: ch.eps_star(),
        trace,
        source_trace: source_trace(&model, theta)?,
        i0,
        variance_bound: variance_bound(i0, eps)?,
        subgaussian_bound,
        query,
    })
}

fn bounds(common: Common, model: Option<BoundModel>, d: Vec<usize>, s: Vec<f64>, eps: Vec<f64>, n: Vec<u64>) -> Result<bool> {
    init_threads(common.threads)?;
    let rows = match (&common.config, model) {
        (Some(p), _) => {
            let cfg = ExperimentConfig::load(p)?;
            cfg.rows()
                .iter()
                .map(|r| {
                    let (vt, rate, report) = row_bounds(&cfg.scenario, r)?;
                    Ok(BoundRow { model: cfg.mechanism().into(), d: r.d, s: r.s, eps: r.eps, n: r.n, vt_bound: vt, rate, report })
                })
                .collect::<Result<Vec<_>>>()?
        }
        (None, Some(kind)) => {
            if d.is_empty() || eps.is_empty() || n.is_empty() {
                return Err(Error::Config("--d, --eps and --n are required without --config".into()));
            }
            let s = if s.is_empty() { vec![1.0] } else { s };
            let mut rows = Vec::new();
            for &d in &d {
                for &s in &s {
                    for &e in &eps {
                        for &n in &n {
                            let (m, dom) = bound_model(kind, d, s)?;
                            let lb = minimax_lower_bound(&m, &dom, n, e)?;
                            rows.push(BoundRow {
                                model: format!("{kind:?}").to_lowercase(),
                                d,
                                s,
                                eps: e,
                                n,
                                vt_bound: lb.van_trees_value,
                                rate: lb.rate,
                                report: Some(lb),
                            });
                        }
                    }
                }
            }
            rows
        }
        (None, None) => return Err(Error::Config("bounds needs --config or --model".into())),
    };
    println!("{:<16} {:>5} {:>5} {:>7} {:>9} {:>12} {:>12} {:>22} {:>5}", "model", "d", "s", "eps", "n", "vt_bound", "rate", "corollary", "cond");
    for r in &rows {
        let (cor, ok) = r
            .report
            .as_ref()
            .map(|l| (format!("{:?}", l.corollary), l.condition_ok))
            .unwrap_or_else(|| ("-".into(), true));
        println!(
            "{:<16} {:>5} {:>5} {:>7.3} {:>9} {:>12.4e} {:>12.4e} {:>22} {:>5}",
            r.model, r.d, r.s, r.eps, r.n, r.vt_bound, r.rate, cor, ok
        );
    }
    if let Some(dir) = &common.out {
        write_json(dir, "bounds.json", &rows)?;
    }
    Ok(true)
}

fn bound_model(kind: BoundModel, d: usize, s: f64) -> Result<(StatModel, ParamDomain)> {
    Ok(match kind {
        BoundModel::Discrete => (StatModel::multinomial(d)?, ParamDomain::multinomial_local(d)?),
        BoundModel::SparseBernoulli => (StatModel::bernoulli(d)?, ParamDomain::sparse_bernoulli(d, 1.0)?),
        BoundModel::SSparse => (StatModel::bernoulli(d)?, ParamDomain::sparse_bernoulli(d, s)?),
        BoundModel::Gaussian => (StatModel::gaussian(d, 1.0)?, ParamDomain::symmetric_cube(d, 1.0)?),
    })
}
