use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use truncmlmc::anova::{analytic_profile, mc_profile};
use truncmlmc::bench::{
    cell_stream, emit, fixed_point, fmt_real, lemma1_csv, lemma1_diagnostic, records_csv, run_config, ANOVA_LABEL,
    DECAY_LABEL,
};
use truncmlmc::config::{ExperimentConfig, IntegrandSpec, Method, RawConfig};
use truncmlmc::markov::{estimate_markov_mlmc_with, markov_schedule, measure_decay, standard_mc_chain};
use truncmlmc::mlmc::{estimate_phi_v, estimate_tilde_phi, replicate_records, standard_mc, truncation_schedule};
use truncmlmc::{Error, Result, UniformStream};

#[derive(Parser)]
#[command(name = "truncmlmc", version, about = "Multilevel Monte Carlo with truncation-dimension-aware levels")]
struct Cli {
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fixed point for `mlmc-fixed`: midpoint, sample or explicit.
    #[arg(long = "fix-v", global = true)]
    fix_v: Option<String>,
    /// Explicit fixed point, comma separated.
    #[arg(long, global = true)]
    v: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Residual-variance profile D(0..=d).
    Anova(AnovaArgs),
    /// Replicate one estimator and dump per-level sums.
    Estimate(EstimateArgs),
    /// Method comparison over a dimension grid.
    Bench(BenchArgs),
    /// Chain estimator or decay measurement.
    Markov(MarkovArgs),
    /// Level-variance diagnostic against the analytic profile.
    Lemma1(BenchArgs),
}

#[derive(Args)]
struct IntegrandArg {
    /// Inline spec such as `additive:d=16:r=0.5` or `product:coeffs=1,1`, or a config file.
    #[arg(long)]
    integrand: Option<String>,
    /// Dimension, when the spec does not fix it.
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Args)]
struct AnovaArgs {
    #[command(flatten)]
    integrand: IntegrandArg,
    /// `analytic` or `mc`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    pairs: Option<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    integrand: IntegrandArg,
    /// `mlmc`, `mlmc-fixed` or `mc`.
    #[arg(long, default_value = "mlmc")]
    method: String,
    #[arg(long)]
    reps: Option<usize>,
    /// Samples per replication for `mc`.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    integrand: Option<String>,
    #[arg(long)]
    methods: Option<String>,
    #[arg(long = "d-grid")]
    d_grid: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    /// Also write one row per replication.
    #[arg(long = "per-rep")]
    per_rep: bool,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct MarkovArgs {
    #[command(subcommand)]
    action: Option<MarkovCmd>,
    #[command(flatten)]
    chain: ChainArgs,
    /// `markov` or `markov-mc`.
    #[arg(long, default_value = "markov")]
    method: String,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct ChainArgs {
    /// Horizon.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Use the periodically modulated increment law.
    #[arg(long = "time-varying")]
    time_varying: bool,
}

#[derive(Subcommand)]
enum MarkovCmd {
    /// Mean squared effect of restarting the last i steps.
    Decay {
        #[command(flatten)]
        chain: ChainArgs,
        /// Restart lengths, comma separated.
        #[arg(long)]
        i: Option<String>,
        /// Samples per restart length (default 10000).
        #[arg(long)]
        n: Option<usize>,
    },
}

fn set_opt<T: ToString>(raw: &mut RawConfig, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        raw.set(key, v.to_string());
    }
}

/// Loads `--config`, then lets command-line flags override it.
fn base_raw(cli: &Cli) -> Result<RawConfig> {
    let mut raw = match &cli.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    set_opt(&mut raw, "seed", &cli.seed);
    set_opt(&mut raw, "run.fix_v", &cli.fix_v);
    set_opt(&mut raw, "run.v", &cli.v);
    if let Some(o) = &cli.out {
        raw.set("run.out", o.display().to_string());
    }
    Ok(raw)
}

fn integrand_spec(arg: Option<&str>, raw: &RawConfig) -> Result<IntegrandSpec> {
    match arg {
        None => IntegrandSpec::from_raw(raw),
        Some(s) if Path::new(s).is_file() => IntegrandSpec::from_raw(&RawConfig::load(Path::new(s))?),
        Some(s) => IntegrandSpec::parse_inline(s),
    }
}

fn resolve_dim(spec: &IntegrandSpec, d: Option<usize>) -> Result<usize> {
    d.or(spec.natural_dim())
        .ok_or_else(|| Error::config("integrand.d", "dimension not given"))
}

fn apply_chain(raw: &mut RawConfig, c: &ChainArgs) {
    set_opt(raw, "chain.d", &c.d);
    set_opt(raw, "chain.gamma", &c.gamma);
    if c.time_varying {
        raw.set("chain.time_varying", "true");
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut raw = base_raw(&cli)?;
    set_opt(&mut raw, "threads", &cli.threads);
    if let Some(t) = raw.parse_value::<usize>("threads")? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::config("threads", e.to_string()))?;
    }
    let bytes = match &cli.cmd {
        Cmd::Anova(a) => {
            set_opt(&mut raw, "anova.method", &a.method);
            set_opt(&mut raw, "anova.pairs", &a.pairs);
            let cfg = ExperimentConfig::from_raw(&raw)?;
            let spec = integrand_spec(a.integrand.integrand.as_deref(), &raw)?;
            let f = spec.build(resolve_dim(&spec, a.integrand.d)?)?;
            let profile = match raw.get("anova.method").unwrap_or("analytic") {
                "analytic" => analytic_profile(&f)?,
                "mc" => {
                    let pairs = raw.parse_value("anova.pairs")?.unwrap_or(100_000);
                    mc_profile(&f, pairs, &UniformStream::new(cfg.seed).fork(ANOVA_LABEL))?
                }
                other => return Err(Error::config("anova.method", format!("expected analytic|mc, got `{other}`"))),
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["i", "D", "SE", "d_t", "var_f"])?;
            for (i, (dv, se)) in profile.d.iter().zip(&profile.se).enumerate() {
                w.write_record([
                    i.to_string(),
                    fmt_real(*dv),
                    fmt_real(*se),
                    fmt_real(profile.d_t),
                    fmt_real(profile.var_f),
                ])?;
            }
            w.into_inner().map_err(|e| Error::Io(e.to_string()))?
        }
        Cmd::Estimate(a) => {
            set_opt(&mut raw, "run.reps", &a.reps);
            set_opt(&mut raw, "run.n", &a.n);
            let cfg = ExperimentConfig::from_raw(&raw)?;
            let spec = integrand_spec(a.integrand.integrand.as_deref(), &raw)?;
            let d = resolve_dim(&spec, a.integrand.d)?;
            let f = spec.build(d)?;
            let method: Method = a.method.parse()?;
            let root = cell_stream(cfg.seed, method, d);
            let records = match method {
                Method::Mc => replicate_records(|s| standard_mc(&f, cfg.mc_n, s), cfg.reps, &root)?,
                Method::Mlmc => {
                    let sch = truncation_schedule(d)?;
                    replicate_records(|s| estimate_tilde_phi(&f, &sch, s), cfg.reps, &root)?
                }
                Method::MlmcFixed => {
                    let sch = truncation_schedule(d)?;
                    let v = fixed_point(&cfg.fix_v, cfg.seed, d)?;
                    replicate_records(|s| estimate_phi_v(&f, &v, &sch, s), cfg.reps, &root)?
                }
                _ => return Err(Error::config("method", "estimate takes mc|mlmc|mlmc-fixed")),
            };
            check_finite(&records, method, d)?;
            records_csv(&records)?
        }
        Cmd::Bench(a) => {
            apply_bench(&mut raw, a);
            let mut cfg = ExperimentConfig::from_raw(&raw)?;
            if let Some(s) = &a.integrand {
                cfg.integrand = integrand_spec(Some(s), &raw)?;
            }
            run_config(&cfg)?
        }
        Cmd::Lemma1(a) => {
            apply_bench(&mut raw, a);
            let mut cfg = ExperimentConfig::from_raw(&raw)?;
            if let Some(s) = &a.integrand {
                cfg.integrand = integrand_spec(Some(s), &raw)?;
            }
            lemma1_csv(&lemma1_diagnostic(&cfg)?)?
        }
        Cmd::Markov(a) => match &a.action {
            Some(MarkovCmd::Decay { chain, i, n }) => {
                apply_chain(&mut raw, chain);
                set_opt(&mut raw, "decay.i", i);
                set_opt(&mut raw, "decay.n", n);
                let cfg = ExperimentConfig::from_raw(&raw)?;
                let is: Vec<usize> = raw
                    .parse_list("decay.i")?
                    .ok_or_else(|| Error::config("decay.i", "restart lengths not given"))?;
                let n = raw.parse_value("decay.n")?.unwrap_or(10_000);
                let model = cfg.chain.build(cfg.chain.d);
                let rep = measure_decay(&model, &is, n, &UniformStream::new(cfg.seed).fork(DECAY_LABEL))?;
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["kind", "i", "msd", "se", "slope", "intercept", "r2"])?;
                for (k, &iv) in is.iter().enumerate() {
                    w.write_record([
                        "point".to_string(),
                        iv.to_string(),
                        fmt_real(rep.msd[k]),
                        fmt_real(rep.se[k]),
                        String::new(),
                        String::new(),
                        String::new(),
                    ])?;
                }
                for (kind, fit) in [("geometric", rep.geometric), ("power", rep.power)] {
                    if let Some(fit) = fit {
                        w.write_record([
                            kind.to_string(),
                            String::new(),
                            String::new(),
                            String::new(),
                            fmt_real(fit.slope),
                            fmt_real(fit.intercept),
                            fmt_real(fit.r_squared),
                        ])?;
                    }
                }
                w.into_inner().map_err(|e| Error::Io(e.to_string()))?
            }
            None => {
                apply_chain(&mut raw, &a.chain);
                set_opt(&mut raw, "run.reps", &a.reps);
                set_opt(&mut raw, "run.n", &a.n);
                let cfg = ExperimentConfig::from_raw(&raw)?;
                let d = cfg.chain.d;
                let model = cfg.chain.build(d);
                let method: Method = a.method.parse()?;
                let root = cell_stream(cfg.seed, method, d);
                let records = match method {
                    Method::Markov => {
                        let sch = markov_schedule(d, cfg.chain.gamma)?;
                        replicate_records(|s| estimate_markov_mlmc_with(&model, &sch, s), cfg.reps, &root)?
                    }
                    Method::MarkovMc => replicate_records(|s| standard_mc_chain(&model, cfg.mc_n, s), cfg.reps, &root)?,
                    _ => return Err(Error::config("method", "markov takes markov|markov-mc")),
                };
                check_finite(&records, method, d)?;
                records_csv(&records)?
            }
        },
    };
    let out = raw.get("run.out").map(PathBuf::from);
    emit(&bytes, out.as_deref())
}

fn apply_bench(raw: &mut RawConfig, a: &BenchArgs) {
    set_opt(raw, "run.methods", &a.methods);
    set_opt(raw, "run.d_grid", &a.d_grid);
    set_opt(raw, "run.eps", &a.eps);
    set_opt(raw, "run.reps", &a.reps);
    if a.per_rep {
        raw.set("run.per_rep", "true");
    }
}

fn check_finite(records: &[truncmlmc::mlmc::EstimateRecord], method: Method, d: usize) -> Result<()> {
    match records.iter().position(|r| !r.value.is_finite()) {
        Some(r) => Err(Error::Numerical(format!("method={} d={d} rep={r}", method.name()))),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Numerical(_) => 3,
                Error::Io(_) => 1,
                _ => 2,
            })
        }
    }
}
