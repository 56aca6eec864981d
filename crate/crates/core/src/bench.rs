//! Experiment runner: replicated estimator cells and their CSV output.
//!
//! Stream layout under the root seed (labels are fixed):
//!
//! | stream                              | used by                     |
//! |-------------------------------------|-----------------------------|
//! | `root.fork(method label).fork(d)`   | one (method, d) cell        |
//! | `root.fork(FIX_V_LABEL).fork(d)`    | sampled fixed point         |
//! | `root.fork(ANOVA_LABEL)`            | Monte Carlo profiles        |
//! | `root.fork(DECAY_LABEL)`            | chain decay measurements    |
//! | `root.fork(LEMMA1_LABEL).fork(d)`   | level-variance diagnostic   |
//!
//! Method labels are 1 `mc`, 2 `mlmc`, 3 `mlmc-fixed`, 4 `markov`,
//! 5 `markov-mc`. Replication `r` of a cell uses `cell.fork(r)`.
//!
//! Reals are written with 17 significant digits (`{:.16e}`).

use std::io::Write;

use rayon::prelude::*;

use crate::anova::{analytic_profile, InequalityReport};
use crate::config::{ExperimentConfig, FixV, Method};
use crate::error::{Error, Result};
use crate::integrand::Integrand;
use crate::markov::{estimate_markov_mlmc_with, markov_schedule, standard_mc_chain};
use crate::mlmc::{
    estimate_phi_v, estimate_tilde_phi, lemma1_check, lemma1_rhs_se, level_variances, replicate_records,
    standard_mc, summarize, tilde_phi_variance_bound, total_budget, truncation_schedule,
    work_normalized_variance, EstimateRecord, EstimateSummary,
};
use crate::rng::UniformStream;

pub const FIX_V_LABEL: u64 = 100;
pub const ANOVA_LABEL: u64 = 101;
pub const DECAY_LABEL: u64 = 102;
pub const LEMMA1_LABEL: u64 = 103;

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Stream of one (method, d) cell.
pub fn cell_stream(seed: u64, method: Method, d: usize) -> UniformStream {
    UniformStream::new(seed).fork(method.stream_label()).fork(d as u64)
}

/// Base point for the deterministic-fixing estimator at dimension `d`.
pub fn fixed_point(fix: &FixV, seed: u64, d: usize) -> Result<Vec<f64>> {
    match fix {
        FixV::Midpoint => Ok(vec![0.5; d]),
        FixV::Sample => Ok(UniformStream::new(seed).fork(FIX_V_LABEL).fork(d as u64).draw(d)),
        FixV::Explicit(v) if v.len() == d => Ok(v.clone()),
        FixV::Explicit(v) => Err(Error::config("run.v", format!("has {} entries but d = {d}", v.len()))),
    }
}

/// All replications of one cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub method: Method,
    pub d: usize,
    pub records: Vec<EstimateRecord>,
    pub summary: EstimateSummary,
    /// Variance bound for the coupled estimator, where one applies.
    pub bound: Option<f64>,
}

/// Runs every replication of `method` at dimension (or horizon) `d`.
pub fn run_cell(config: &ExperimentConfig, method: Method, d: usize) -> Result<CellResult> {
    let root = cell_stream(config.seed, method, d);
    let reps = config.reps;
    let mut bound = None;
    let records = match method {
        Method::Mc => {
            let f = config.integrand.build(d)?;
            replicate_records(|s| standard_mc(&f, config.mc_n, s), reps, &root)?
        }
        Method::Mlmc => {
            let f = config.integrand.build(d)?;
            let schedule = truncation_schedule(d)?;
            let p = analytic_profile(&f)?;
            bound = Some(tilde_phi_variance_bound(d, p.d_t, p.var_f));
            replicate_records(|s| estimate_tilde_phi(&f, &schedule, s), reps, &root)?
        }
        Method::MlmcFixed => {
            let f = config.integrand.build(d)?;
            let schedule = truncation_schedule(d)?;
            let v = fixed_point(&config.fix_v, config.seed, d)?;
            replicate_records(|s| estimate_phi_v(&f, &v, &schedule, s), reps, &root)?
        }
        Method::Markov => {
            let model = config.chain.build(d);
            let schedule = markov_schedule(d, config.chain.gamma)?;
            replicate_records(|s| estimate_markov_mlmc_with(&model, &schedule, s), reps, &root)?
        }
        Method::MarkovMc => {
            let model = config.chain.build(d);
            replicate_records(|s| standard_mc_chain(&model, config.mc_n, s), reps, &root)?
        }
    };
    let cell = || format!("method={} d={d}", method.name());
    if let Some(r) = records.iter().position(|r| !r.value.is_finite()) {
        return Err(Error::Numerical(format!("{} rep={r}", cell())));
    }
    let summary = summarize(&records).map_err(|_| Error::Numerical(cell()))?;
    Ok(CellResult {
        method,
        d,
        records,
        summary,
        bound,
    })
}

/// One summary line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub d: usize,
    pub eps: f64,
    pub mean: f64,
    pub sample_variance: f64,
    pub mean_cost: f64,
    pub wnv: f64,
    pub total_budget: f64,
    pub theoretical_bound: Option<f64>,
}

impl BenchRow {
    fn new(cell: &CellResult, eps: f64) -> Result<Self> {
        let s = &cell.summary;
        Ok(Self {
            method: cell.method,
            d: cell.d,
            eps,
            mean: s.mean,
            sample_variance: s.sample_variance,
            mean_cost: s.mean_cost,
            wnv: work_normalized_variance(s),
            total_budget: total_budget(s, eps)?,
            theoretical_bound: cell.bound,
        })
    }
}

fn sorted_unique<T: PartialOrd + Copy>(xs: &[T]) -> Vec<T> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in grid"));
    v.dedup();
    v
}

/// Runs the (method, d) grid concurrently; cells come back sorted by method
/// then `d`.
pub fn run_cells(config: &ExperimentConfig) -> Result<Vec<CellResult>> {
    config.validate()?;
    let methods = sorted_unique(&config.methods);
    let grid = sorted_unique(&config.d_grid);
    let cells: Vec<(Method, usize)> = methods
        .iter()
        .flat_map(|&m| grid.iter().map(move |&d| (m, d)))
        .collect();
    cells.par_iter().map(|&(m, d)| run_cell(config, m, d)).collect()
}

fn rows_for(cells: &[CellResult], eps: &[f64]) -> Result<Vec<BenchRow>> {
    let eps = sorted_unique(eps);
    let mut rows = Vec::new();
    for c in cells {
        for &e in &eps {
            rows.push(BenchRow::new(c, e)?);
        }
    }
    Ok(rows)
}

/// Summary rows for every (method, d, eps) cell.
pub fn compare_scaling(config: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    rows_for(&run_cells(config)?, &config.eps)
}

pub const BENCH_HEADER: [&str; 13] = [
    "row_type",
    "method",
    "d",
    "eps",
    "rep",
    "value",
    "cost_units",
    "mean",
    "variance",
    "mean_cost",
    "wnv",
    "total_budget",
    "theoretical_bound",
];

/// Long-format CSV: one `summary` row per (method, d, eps), then, when
/// `per_rep` is set, one `rep` row per replication. Empty cells mark columns
/// that do not apply to the row type.
pub fn run_config(config: &ExperimentConfig) -> Result<Vec<u8>> {
    let cells = run_cells(config)?;
    let rows = rows_for(&cells, &config.eps)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BENCH_HEADER)?;
    for r in &rows {
        w.write_record([
            "summary".to_string(),
            r.method.name().to_string(),
            r.d.to_string(),
            fmt_real(r.eps),
            String::new(),
            String::new(),
            String::new(),
            fmt_real(r.mean),
            fmt_real(r.sample_variance),
            fmt_real(r.mean_cost),
            fmt_real(r.wnv),
            fmt_real(r.total_budget),
            r.theoretical_bound.map(fmt_real).unwrap_or_default(),
        ])?;
    }
    if config.per_rep {
        for c in &cells {
            for (k, rec) in c.records.iter().enumerate() {
                w.write_record([
                    "rep".to_string(),
                    c.method.name().to_string(),
                    c.d.to_string(),
                    String::new(),
                    k.to_string(),
                    fmt_real(rec.value),
                    rec.cost_units().to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?;
            }
        }
    }
    finish(w)
}

/// Per-replication, per-level CSV of a single cell:
/// `rep, value, cost_units, level, level_sum, level_count`.
pub fn records_csv(records: &[EstimateRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rep", "value", "cost_units", "level", "level_sum", "level_count"])?;
    for (k, rec) in records.iter().enumerate() {
        for st in &rec.per_level {
            w.write_record([
                k.to_string(),
                fmt_real(rec.value),
                rec.cost_units().to_string(),
                st.level.to_string(),
                fmt_real(st.sum),
                st.count.to_string(),
            ])?;
        }
    }
    finish(w)
}

/// One row of the level-variance diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Row {
    pub family: &'static str,
    pub d: usize,
    pub report: InequalityReport,
}

/// Measures `V_l` from the fixed-point level estimators and checks
/// `Σ D(i) ≤ (Σ √(m_l V_l))²` against the analytic profile, for every `d`
/// in the grid.
pub fn lemma1_diagnostic(config: &ExperimentConfig) -> Result<Vec<Lemma1Row>> {
    if config.reps < 2 {
        return Err(Error::config("run.reps", "need at least 2 replications"));
    }
    sorted_unique(&config.d_grid)
        .par_iter()
        .map(|&d| lemma1_at(config, &config.integrand.build(d)?, d))
        .collect()
}

fn lemma1_at(config: &ExperimentConfig, f: &dyn Integrand, d: usize) -> Result<Lemma1Row> {
    let profile = analytic_profile(f)?;
    let schedule = truncation_schedule(d)?;
    let v = fixed_point(&config.fix_v, config.seed, d)?;
    let root = UniformStream::new(config.seed).fork(LEMMA1_LABEL).fork(d as u64);
    let records = replicate_records(|s| estimate_phi_v(f, &v, &schedule, s), config.reps, &root)?;
    let lv = level_variances(&records);
    let vs: Vec<f64> = lv.iter().map(|x| x.0).collect();
    let m = schedule.prefix_lengths();
    let report = lemma1_check(m, &vs, &profile.d, lemma1_rhs_se(m, &lv))?;
    Ok(Lemma1Row {
        family: f.analytic().map(|a| a.name()).unwrap_or("custom"),
        d,
        report,
    })
}

pub fn lemma1_csv(rows: &[Lemma1Row]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["family", "d", "lhs", "rhs", "se", "pass"])?;
    for r in rows {
        w.write_record([
            r.family.to_string(),
            r.d.to_string(),
            fmt_real(r.report.lhs),
            fmt_real(r.report.rhs),
            fmt_real(r.report.se),
            r.report.pass.to_string(),
        ])?;
    }
    finish(w)
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// Writes `bytes` to `path`, or to stdout when `path` is `None`.
pub fn emit(bytes: &[u8], path: Option<&std::path::Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}
