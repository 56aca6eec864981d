//! Residual-variance profiles `D(0..=d)` and truncation dimension.
//!
//! `D(i)` is the variance carried by ANOVA terms that involve at least one
//! coordinate beyond the first `i`. Profiles come either from the closed-form
//! families or from a pairing oracle: if `V` and `V'` are uniform and share
//! exactly their first `i` coordinates then
//! `D(i) = Var f − Cov(f(V), f(V')) = E[(f(V) − f(V'))²] / 2`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrand::Integrand;
use crate::rng::UniformStream;
use crate::stats::{isotonic_nonincreasing, variance_with_se, Moments};

/// Slack multiplier on standard errors for the finite-sample inequality checks.
pub const SE_SLACK: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    Analytic,
    MonteCarlo { n_pairs: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProfile {
    /// `D(0..=d)`; monotone after post-processing.
    pub d: Vec<f64>,
    /// Pre-isotonic estimates (equal to `d` for analytic profiles).
    pub raw: Vec<f64>,
    /// Standard errors of `raw` (zeros for analytic profiles).
    pub se: Vec<f64>,
    pub var_f: f64,
    pub d_t: f64,
    pub source: ProfileSource,
}

impl VarianceProfile {
    pub fn dim(&self) -> usize {
        self.d.len() - 1
    }
}

/// Exact profile of an analytic-family integrand.
pub fn analytic_profile(f: &dyn Integrand) -> Result<VarianceProfile> {
    let fam = f.analytic().ok_or(Error::UnsupportedIntegrand)?;
    let w = fam.max_index_weights();
    let d = w.len();
    let mut prof = vec![0.0; d + 1];
    for i in (0..d).rev() {
        prof[i] = prof[i + 1] + w[i];
    }
    let var_f = prof[0];
    if var_f <= 0.0 {
        return Err(Error::DegenerateIntegrand);
    }
    // definition: variance-weighted mean of max(Y)
    let d_t = w
        .iter()
        .enumerate()
        .map(|(k, wk)| (k + 1) as f64 * wk)
        .sum::<f64>()
        / var_f;
    Ok(VarianceProfile {
        raw: prof.clone(),
        se: vec![0.0; d + 1],
        d: prof,
        var_f,
        d_t,
        source: ProfileSource::Analytic,
    })
}

/// Draws a pair `(V, V')` sharing the first `i` coordinates into the buffers.
fn draw_shared_pair(stream: &mut UniformStream, i: usize, v: &mut [f64], vp: &mut [f64]) {
    stream.fill(v);
    vp[..i].copy_from_slice(&v[..i]);
    stream.fill(&mut vp[i..]);
}

/// Samples of `f(V) − f(V')` over `n` shared-prefix pairs.
fn pair_differences(f: &dyn Integrand, i: usize, n: usize, stream: &mut UniformStream) -> Vec<f64> {
    let d = f.dim();
    let mut v = vec![0.0; d];
    let mut vp = vec![0.0; d];
    (0..n)
        .map(|_| {
            draw_shared_pair(stream, i, &mut v, &mut vp);
            f.value(&v) - f.value(&vp)
        })
        .collect()
}

/// `(estimate, se)` of `D(i)` from `n` pairs.
fn estimate_d(f: &dyn Integrand, i: usize, n: usize, stream: &mut UniformStream) -> (f64, f64) {
    let m: Moments = pair_differences(f, i, n, stream)
        .into_iter()
        .map(|x| 0.5 * x * x)
        .collect();
    (m.mean, m.std_error())
}

/// Monte Carlo profile for a black-box integrand.
///
/// Each `i` uses its own fork of `stream` (label `i`), so results do not
/// depend on scheduling.
pub fn mc_profile(f: &dyn Integrand, n_pairs: usize, stream: &UniformStream) -> Result<VarianceProfile> {
    if n_pairs < 2 {
        return Err(Error::invalid("mc_profile needs at least 2 pairs"));
    }
    let d = f.dim();
    let est: Vec<(f64, f64)> = (0..=d)
        .into_par_iter()
        .map(|i| {
            if i == d {
                (0.0, 0.0)
            } else {
                let mut s = stream.fork(i as u64);
                estimate_d(f, i, n_pairs, &mut s)
            }
        })
        .collect();
    let raw: Vec<f64> = est.iter().map(|e| e.0).collect();
    let se: Vec<f64> = est.iter().map(|e| e.1).collect();
    let var_f = raw[0];
    if !var_f.is_finite() {
        return Err(Error::Numerical("mc_profile variance".into()));
    }
    if var_f <= 0.0 {
        return Err(Error::DegenerateIntegrand);
    }
    let mut prof = raw.clone();
    if d >= 2 {
        let weights: Vec<f64> = se[1..d].iter().map(|s| 1.0 / (s * s + 1e-300)).collect();
        let fitted = isotonic_nonincreasing(&raw[1..d], &weights);
        prof[1..d].copy_from_slice(&fitted);
    }
    for x in prof.iter_mut() {
        *x = x.clamp(0.0, var_f);
    }
    prof[0] = var_f;
    prof[d] = 0.0;
    let d_t = prof.iter().sum::<f64>() / var_f;
    Ok(VarianceProfile {
        d: prof,
        raw,
        se,
        var_f,
        d_t,
        source: ProfileSource::MonteCarlo { n_pairs },
    })
}

/// `Σ D(i) / Var f`.
pub fn truncation_dimension(profile: &VarianceProfile) -> Result<f64> {
    if !(profile.var_f > 0.0) {
        return Err(Error::invalid("profile variance must be positive"));
    }
    Ok(profile.d.iter().sum::<f64>() / profile.var_f)
}

/// Outcome of a finite-sample check of `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    /// Standard error of `lhs − rhs`.
    pub se: f64,
    pub pass: bool,
}

impl InequalityReport {
    pub fn new(lhs: f64, rhs: f64, se: f64, rel_slack: f64) -> Self {
        let pass = lhs <= rhs * (1.0 + rel_slack) + SE_SLACK * se;
        Self { lhs, rhs, se, pass }
    }
}

/// `Var(f(V) − f(V')) ≤ 4 D(i)` for pairs sharing the first `i` coordinates.
pub fn check_prop1(
    f: &dyn Integrand,
    i: usize,
    profile: &VarianceProfile,
    n: usize,
    stream: &mut UniformStream,
) -> Result<InequalityReport> {
    let d = f.dim();
    if i > d || profile.dim() != d {
        return Err(Error::invalid(format!("index {i} outside 0..={d}")));
    }
    let diffs = pair_differences(f, i, n, stream);
    let (lhs, se_lhs) = variance_with_se(&diffs);
    let rhs = 4.0 * profile.d[i];
    let se_rhs = 4.0 * profile.se[i];
    Ok(InequalityReport::new(lhs, rhs, se_lhs.hypot(se_rhs), 0.0))
}

/// `D(i) ≤ Var(f(U) − g(U_1..U_i))`. `g` receives the first `i` coordinates.
pub fn check_prop2(
    f: &dyn Integrand,
    g: &dyn Fn(&[f64]) -> f64,
    i: usize,
    n: usize,
    stream: &mut UniformStream,
) -> Result<InequalityReport> {
    let d = f.dim();
    if i > d {
        return Err(Error::invalid(format!("index {i} outside 0..={d}")));
    }
    if n < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    let (lhs, se_lhs) = if i == d {
        (0.0, 0.0)
    } else {
        estimate_d(f, i, n, stream)
    };
    let mut u = vec![0.0; d];
    let resid: Vec<f64> = (0..n)
        .map(|_| {
            stream.fill(&mut u);
            f.value(&u) - g(&u[..i])
        })
        .collect();
    let (rhs, se_rhs) = variance_with_se(&resid);
    Ok(InequalityReport::new(lhs, rhs, se_lhs.hypot(se_rhs), 0.0))
}
