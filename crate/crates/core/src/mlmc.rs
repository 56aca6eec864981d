//! Truncation-coupled multilevel estimators, the standard Monte Carlo
//! baseline, and the generic work/variance accounting around them.
//!
//! Level `l` of the coupled estimator redraws only the first `m_l`
//! coordinates and keeps the remaining ones from a shared base point, so a
//! level costs `O(m_l)` draws while the level difference only carries the
//! variance of the coordinates between `m_{l-1}` and `m_l`.

use rayon::prelude::*;

use crate::anova::InequalityReport;
use crate::error::{Error, Result};
use crate::integrand::{BaseCache, Integrand};
use crate::rng::{CostLedger, UniformStream};
use crate::stats::pooled_variance_with_se;

/// `⌈log₂ d⌉` for `d ≥ 1`.
pub fn ceil_log2(d: usize) -> usize {
    if d <= 1 {
        0
    } else {
        (usize::BITS - (d - 1).leading_zeros()) as usize
    }
}

/// Prefix lengths `m_0..=m_L` and replication counts `n_1..=n_L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSchedule {
    m: Vec<usize>,
    n: Vec<usize>,
}

impl LevelSchedule {
    /// Checks `m_0 = 0`, `m` strictly increasing, `n_l ≥ 1`.
    pub fn new(m: Vec<usize>, n: Vec<usize>) -> Result<Self> {
        if m.len() < 2 || n.len() + 1 != m.len() {
            return Err(Error::invalid(format!(
                "schedule needs L >= 1 with |m| = L+1 and |n| = L (got |m|={}, |n|={})",
                m.len(),
                n.len()
            )));
        }
        if m[0] != 0 {
            return Err(Error::invalid("m_0 must be 0"));
        }
        if m.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("prefix lengths must be strictly increasing"));
        }
        if n.contains(&0) {
            return Err(Error::invalid("replication counts must be >= 1"));
        }
        Ok(Self { m, n })
    }

    /// Number of levels `L`.
    pub fn levels(&self) -> usize {
        self.n.len()
    }

    /// `m_L`, the dimension the schedule is built for.
    pub fn dim(&self) -> usize {
        *self.m.last().unwrap()
    }

    pub fn prefix_lengths(&self) -> &[usize] {
        &self.m
    }

    pub fn replications(&self) -> &[usize] {
        &self.n
    }

    pub fn m(&self, level: usize) -> usize {
        self.m[level]
    }

    /// `n_l` for `1 ≤ l ≤ L`.
    pub fn n(&self, level: usize) -> usize {
        self.n[level - 1]
    }

    /// `h_l(u, base)`; level 0 is identically zero and touches nothing.
    pub fn hybrid(
        &self,
        f: &dyn Integrand,
        level: usize,
        u: &[f64],
        base: &[f64],
        cache: &BaseCache,
        ledger: &mut CostLedger,
    ) -> f64 {
        if level == 0 {
            return 0.0;
        }
        f.value_spliced(&u[..self.m[level]], base, cache, ledger)
    }

    /// Coordinate draws spent on prefix redraws, `Σ n_l m_l`.
    pub fn prefix_draws(&self) -> u64 {
        (1..=self.levels()).map(|l| (self.n(l) * self.m(l)) as u64).sum()
    }
}

/// `L = ⌈log₂ d⌉`, `m_l = 2^l − 1` for `l < L`, `m_L = d`,
/// `n_l = ⌈(d/L)·2^{−l}⌉`.
pub fn truncation_schedule(d: usize) -> Result<LevelSchedule> {
    if d < 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    let levels = ceil_log2(d);
    let mut m: Vec<usize> = (0..levels).map(|l| (1usize << l) - 1).collect();
    m.push(d);
    let n = (1..=levels)
        .map(|l| {
            let denom = levels << l;
            d.div_ceil(denom)
        })
        .collect();
    LevelSchedule::new(m, n)
}

/// Per-level running sums of the level differences inside one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStat {
    pub level: usize,
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl LevelStat {
    fn new(level: usize) -> Self {
        Self {
            level,
            count: 0,
            sum: 0.0,
            sum_sq: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }
}

/// One replication of an estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub value: f64,
    pub cost: CostLedger,
    pub per_level: Vec<LevelStat>,
}

impl EstimateRecord {
    pub fn cost_units(&self) -> u64 {
        self.cost.total()
    }
}

fn check_dim(f: &dyn Integrand, schedule: &LevelSchedule) -> Result<()> {
    if schedule.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: schedule.dim(),
        });
    }
    Ok(())
}

/// Runs every level against a fixed base point. Level `l` draws from
/// `stream.fork(l)`.
fn run_levels(
    f: &dyn Integrand,
    schedule: &LevelSchedule,
    base: &[f64],
    cache: &BaseCache,
    stream: &UniformStream,
    ledger: &mut CostLedger,
) -> (f64, Vec<LevelStat>) {
    let mut u = vec![0.0; f.dim()];
    let mut value = 0.0;
    let mut stats = Vec::with_capacity(schedule.levels());
    for l in 1..=schedule.levels() {
        let mut s = stream.fork(l as u64);
        let m_hi = schedule.m(l);
        let mut st = LevelStat::new(l);
        for _ in 0..schedule.n(l) {
            ledger.draw_into(&mut s, &mut u[..m_hi]);
            let hi = schedule.hybrid(f, l, &u, base, cache, ledger);
            let lo = schedule.hybrid(f, l - 1, &u, base, cache, ledger);
            st.push(hi - lo);
        }
        value += st.mean();
        stats.push(st);
    }
    (value, stats)
}

/// One replication of the coupled estimator: the base point `U'` comes from
/// `stream`, level `l` from `stream.fork(l)`.
pub fn estimate_tilde_phi(
    f: &dyn Integrand,
    schedule: &LevelSchedule,
    stream: &mut UniformStream,
) -> Result<EstimateRecord> {
    check_dim(f, schedule)?;
    let mut ledger = CostLedger::new();
    let mut base = vec![0.0; f.dim()];
    ledger.draw_into(stream, &mut base);
    let cache = f.prepare_base(&base, &mut ledger);
    let (value, per_level) = run_levels(f, schedule, &base, &cache, stream, &mut ledger);
    Ok(EstimateRecord {
        value,
        cost: ledger,
        per_level,
    })
}

/// The coupled estimator with the base point fixed to `v`.
pub fn estimate_phi_v(
    f: &dyn Integrand,
    v: &[f64],
    schedule: &LevelSchedule,
    stream: &mut UniformStream,
) -> Result<EstimateRecord> {
    check_dim(f, schedule)?;
    if v.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: v.len(),
        });
    }
    if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::invalid("fixed point must lie in [0,1]^d"));
    }
    let mut ledger = CostLedger::new();
    let cache = f.prepare_base(v, &mut ledger);
    let (value, per_level) = run_levels(f, schedule, v, &cache, stream, &mut ledger);
    Ok(EstimateRecord {
        value,
        cost: ledger,
        per_level,
    })
}

/// Plain average of `f` over `n` independent uniform points.
pub fn standard_mc(f: &dyn Integrand, n: usize, stream: &mut UniformStream) -> Result<EstimateRecord> {
    if n == 0 {
        return Err(Error::invalid("standard_mc needs n >= 1"));
    }
    let mut ledger = CostLedger::new();
    let mut u = vec![0.0; f.dim()];
    let mut st = LevelStat::new(1);
    for _ in 0..n {
        ledger.draw_into(stream, &mut u);
        f.charge_full(&mut ledger);
        st.push(f.value(&u));
    }
    Ok(EstimateRecord {
        value: st.mean(),
        cost: ledger,
        per_level: vec![st],
    })
}

/// Aggregate over independent replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSummary {
    pub mean: f64,
    /// Unbiased, `R − 1` divisor.
    pub sample_variance: f64,
    pub mean_cost: f64,
    pub replications: usize,
}

impl EstimateSummary {
    /// Standard error of `mean`.
    pub fn std_error(&self) -> f64 {
        (self.sample_variance / self.replications as f64).sqrt()
    }
}

/// Runs `estimator` on `root.fork(r)` for `r = 0..R` and keeps every record.
/// Records come back in replication order whatever the thread count.
pub fn replicate_records<F>(estimator: F, reps: usize, root: &UniformStream) -> Result<Vec<EstimateRecord>>
where
    F: Fn(&mut UniformStream) -> Result<EstimateRecord> + Sync,
{
    if reps < 2 {
        return Err(Error::invalid("need at least 2 replications"));
    }
    (0..reps)
        .into_par_iter()
        .map(|r| estimator(&mut root.fork(r as u64)))
        .collect()
}

pub fn summarize(records: &[EstimateRecord]) -> Result<EstimateSummary> {
    let r = records.len();
    if r < 2 {
        return Err(Error::invalid("need at least 2 replications"));
    }
    let rf = r as f64;
    let mean = records.iter().map(|x| x.value).sum::<f64>() / rf;
    let sample_variance = records.iter().map(|x| (x.value - mean).powi(2)).sum::<f64>() / (rf - 1.0);
    let mean_cost = records.iter().map(|x| x.cost_units() as f64).sum::<f64>() / rf;
    if !mean.is_finite() || !sample_variance.is_finite() {
        return Err(Error::Numerical("replication summary".into()));
    }
    Ok(EstimateSummary {
        mean,
        sample_variance,
        mean_cost,
        replications: r,
    })
}

pub fn replicate<F>(estimator: F, reps: usize, root: &UniformStream) -> Result<EstimateSummary>
where
    F: Fn(&mut UniformStream) -> Result<EstimateRecord> + Sync,
{
    summarize(&replicate_records(estimator, reps, root)?)
}

/// Pooled per-level variance `V̂_l` with a standard error, over all
/// replications. Index `l − 1` holds level `l`.
pub fn level_variances(records: &[EstimateRecord]) -> Vec<(f64, f64)> {
    let levels = records.iter().map(|r| r.per_level.len()).max().unwrap_or(0);
    (0..levels)
        .map(|k| {
            let groups: Vec<(u64, f64, f64)> = records
                .iter()
                .filter_map(|r| r.per_level.get(k))
                .map(|s| (s.count, s.sum, s.sum_sq))
                .collect();
            pooled_variance_with_se(&groups)
        })
        .collect()
}

/// `Σ V̂_l / n_l` and its standard error, the predicted variance of an
/// estimator whose levels are independent.
pub fn predicted_variance(records: &[EstimateRecord], schedule: &LevelSchedule) -> (f64, f64) {
    let lv = level_variances(records);
    let mut total = 0.0;
    let mut se2 = 0.0;
    for (k, (v, se)) in lv.iter().enumerate() {
        let n = schedule.n(k + 1) as f64;
        total += v / n;
        se2 += (se / n).powi(2);
    }
    (total, se2.sqrt())
}

/// `⌈variance / eps²⌉`, at least 1.
pub fn samples_needed(variance: f64, eps: f64) -> Result<u64> {
    if !(variance > 0.0) || !(eps > 0.0) || !variance.is_finite() || !eps.is_finite() {
        return Err(Error::invalid(format!(
            "samples_needed needs positive finite inputs (variance={variance}, eps={eps})"
        )));
    }
    let x = variance / (eps * eps);
    let r = x.round();
    // absorb rounding noise when the ratio is an integer in exact arithmetic
    let n = if (x - r).abs() <= 1e-9 * r.max(1.0) { r } else { x.ceil() };
    Ok(n.max(1.0) as u64)
}

/// `τ · Var(ψ)`.
pub fn work_normalized_variance(summary: &EstimateSummary) -> f64 {
    summary.mean_cost * summary.sample_variance
}

/// `n_ε · τ`; a zero-variance estimator needs one replication.
pub fn total_budget(summary: &EstimateSummary, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    let n = if summary.sample_variance > 0.0 {
        samples_needed(summary.sample_variance, eps)?
    } else {
        1
    };
    Ok(n as f64 * summary.mean_cost)
}

/// Replications per level minimising cost subject to `Σ V_l / n_l ≤ target`:
/// `n_l = ⌈λ √(V_l / t_l)⌉` with `λ = Σ √(V_l t_l) / target`, clamped to 1.
pub fn optimal_allocation(v: &[f64], t: &[f64], target_variance: f64) -> Result<Vec<u64>> {
    if v.len() != t.len() || v.is_empty() {
        return Err(Error::invalid("variance and cost vectors must have equal nonzero length"));
    }
    if t.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::invalid("level costs must be positive"));
    }
    if v.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::invalid("level variances must be nonnegative"));
    }
    if !(target_variance > 0.0) {
        return Err(Error::invalid("target variance must be positive"));
    }
    let lambda = v.iter().zip(t).map(|(vl, tl)| (vl * tl).sqrt()).sum::<f64>() / target_variance;
    Ok(v.iter()
        .zip(t)
        .map(|(vl, tl)| {
            let x = lambda * (vl / tl).sqrt();
            let r = x.round();
            let n = if (x - r).abs() <= 1e-9 * r.max(1.0) { r } else { x.ceil() };
            n.max(1.0) as u64
        })
        .collect())
}

/// `Σ ν_i ≤ (Σ_l √(m_l V_l))²`.
///
/// `se_rhs` is the standard error of the right side when the `V_l` are
/// estimates; pass 0 for exact inputs.
pub fn lemma1_check(m: &[usize], v: &[f64], nu: &[f64], se_rhs: f64) -> Result<InequalityReport> {
    if m.len() != v.len() + 1 || m.len() < 2 || m[0] != 0 || m.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("prefix vector must be 0 = m_0 < m_1 < ... < m_L with |V| = L"));
    }
    let d = *m.last().unwrap();
    if nu.len() != d + 1 {
        return Err(Error::invalid(format!("nu must have d+1 = {} entries", d + 1)));
    }
    if nu.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("nu must be nonincreasing"));
    }
    if nu[d] != 0.0 {
        return Err(Error::invalid("nu_d must be 0"));
    }
    if v.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::invalid("level variances must be nonnegative"));
    }
    let lhs: f64 = nu.iter().sum();
    let root: f64 = m[1..].iter().zip(v).map(|(&ml, vl)| (ml as f64 * vl).sqrt()).sum();
    Ok(InequalityReport::new(lhs, root * root, se_rhs, 1e-12))
}

/// Standard error of `(Σ √(m_l V_l))²` by the delta method.
pub fn lemma1_rhs_se(m: &[usize], v: &[(f64, f64)]) -> f64 {
    let root: f64 = m[1..].iter().zip(v).map(|(&ml, (vl, _))| (ml as f64 * vl).sqrt()).sum();
    let grad2: f64 = m[1..]
        .iter()
        .zip(v)
        .filter(|(_, (vl, _))| *vl > 0.0)
        .map(|(&ml, (vl, se))| (ml as f64 / (4.0 * vl)) * se * se)
        .sum();
    2.0 * root * grad2.sqrt()
}

/// Upper bound `16 ⌈log₂ d⌉ / d · d_t · Var f` on the coupled estimator's variance.
pub fn tilde_phi_variance_bound(d: usize, d_t: f64, var_f: f64) -> f64 {
    16.0 * ceil_log2(d) as f64 / d as f64 * d_t * var_f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::{make_additive, make_product, FnIntegrand};

    #[test]
    fn schedule_examples() {
        let s = truncation_schedule(8).unwrap();
        assert_eq!(s.levels(), 3);
        assert_eq!(s.prefix_lengths(), &[0, 1, 3, 8]);
        assert_eq!(s.replications(), &[2, 1, 1]);

        let s = truncation_schedule(2).unwrap();
        assert_eq!(s.prefix_lengths(), &[0, 2]);
        assert_eq!(s.replications(), &[1]);

        let s = truncation_schedule(1000).unwrap();
        assert_eq!(s.levels(), 10);
        assert_eq!(s.m(1), 1);
        assert_eq!(s.m(9), 511);
        assert_eq!(s.m(10), 1000);
        assert_eq!(s.n(1), 50);

        assert_eq!(truncation_schedule(1).unwrap_err(), Error::UnsupportedDimension(1));
    }

    #[test]
    fn schedule_validation() {
        assert!(LevelSchedule::new(vec![0, 2, 2], vec![1, 1]).is_err());
        assert!(LevelSchedule::new(vec![1, 2], vec![1]).is_err());
        assert!(LevelSchedule::new(vec![0, 2], vec![0]).is_err());
        assert!(LevelSchedule::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
    }

    #[test]
    fn level_zero_hybrid_is_zero() {
        let f = make_product(vec![1.0, 1.0]).unwrap();
        let s = truncation_schedule(2).unwrap();
        let mut l = CostLedger::new();
        let cache = f.prepare_base(&[0.9, 0.9], &mut l);
        let before = l;
        assert_eq!(s.hybrid(&f, 0, &[0.3, 0.1], &[0.9, 0.9], &cache, &mut l), 0.0);
        assert_eq!(l, before);
    }

    #[test]
    fn tilde_phi_draw_count_is_exact() {
        for d in [2, 5, 8, 33, 100] {
            let f = make_additive(vec![1.0; d]).unwrap();
            let s = truncation_schedule(d).unwrap();
            let rec = estimate_tilde_phi(&f, &s, &mut UniformStream::new(d as u64)).unwrap();
            assert_eq!(rec.cost.coordinate_draws, d as u64 + s.prefix_draws());
            assert!(rec.cost.coordinate_draws <= 9 * d as u64);
        }
    }

    #[test]
    fn tilde_phi_dimension_mismatch() {
        let f = make_additive(vec![1.0; 4]).unwrap();
        let s = truncation_schedule(8).unwrap();
        assert!(estimate_tilde_phi(&f, &s, &mut UniformStream::new(0)).is_err());
    }

    #[test]
    fn telescoping_degeneracy() {
        let d = 16;
        let mut c = vec![0.0; d];
        c[0] = 1.0;
        let f = make_additive(c).unwrap();
        let s = truncation_schedule(d).unwrap();
        let rec = estimate_tilde_phi(&f, &s, &mut UniformStream::new(9)).unwrap();
        for st in &rec.per_level[1..] {
            assert_eq!(st.sum, 0.0);
            assert_eq!(st.sum_sq, 0.0);
        }
    }

    #[test]
    fn single_level_phi_v_ignores_v() {
        let f = make_product(vec![0.7, -0.3]).unwrap();
        let s = truncation_schedule(2).unwrap();
        let a = estimate_phi_v(&f, &[0.0, 0.0], &s, &mut UniformStream::new(4)).unwrap();
        let b = estimate_phi_v(&f, &[1.0, 0.2], &s, &mut UniformStream::new(4)).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.cost.coordinate_draws, 2);
    }

    #[test]
    fn phi_v_rejects_bad_point() {
        let f = make_product(vec![0.7, -0.3]).unwrap();
        let s = truncation_schedule(2).unwrap();
        assert!(estimate_phi_v(&f, &[0.0, 1.5], &s, &mut UniformStream::new(4)).is_err());
        assert!(estimate_phi_v(&f, &[0.0], &s, &mut UniformStream::new(4)).is_err());
    }

    #[test]
    fn standard_mc_single_sample() {
        let f = make_additive(vec![1.0, 2.0, 3.0]).unwrap();
        let mut s = UniformStream::new(8);
        let rec = standard_mc(&f, 1, &mut s.clone()).unwrap();
        let u = s.draw(3);
        assert_eq!(rec.value, f.value(&u));
        assert_eq!(rec.cost_units(), 4);
        assert!(standard_mc(&f, 0, &mut s).is_err());
    }

    #[test]
    fn replicate_constant_estimator() {
        let est = |_: &mut UniformStream| {
            Ok(EstimateRecord {
                value: 3.0,
                cost: CostLedger {
                    coordinate_draws: 5,
                    ..Default::default()
                },
                per_level: vec![],
            })
        };
        let s = replicate(est, 2, &UniformStream::new(0)).unwrap();
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.sample_variance, 0.0);
        assert_eq!(s.mean_cost, 5.0);
        assert!(replicate(est, 1, &UniformStream::new(0)).is_err());
    }

    #[test]
    fn summary_mean_is_arithmetic_mean() {
        let f = FnIntegrand::new(3, |u| u[0] + u[1] * u[2]);
        let root = UniformStream::new(12);
        let recs = replicate_records(|s| standard_mc(&f, 3, s), 500, &root).unwrap();
        let s = summarize(&recs).unwrap();
        let naive = recs.iter().map(|r| r.value).sum::<f64>() / 500.0;
        assert!((s.mean - naive).abs() <= 1e-12 * naive.abs());
    }

    #[test]
    fn samples_needed_examples() {
        assert_eq!(samples_needed(1.0, 0.1).unwrap(), 100);
        assert_eq!(samples_needed(0.025, 0.1).unwrap(), 3);
        assert_eq!(samples_needed(1e-6, 1.0).unwrap(), 1);
        assert!(samples_needed(0.0, 1.0).is_err());
        assert!(samples_needed(1.0, -1.0).is_err());
    }

    fn summary(var: f64, cost: f64) -> EstimateSummary {
        EstimateSummary {
            mean: 0.0,
            sample_variance: var,
            mean_cost: cost,
            replications: 10,
        }
    }

    #[test]
    fn wnv_and_budget() {
        assert_eq!(work_normalized_variance(&summary(0.5, 10.0)), 5.0);
        assert_eq!(total_budget(&summary(1.0, 3.0), 0.1).unwrap(), 300.0);
        assert_eq!(total_budget(&summary(1.0, 3.0), 1e6).unwrap(), 3.0);
        let a = total_budget(&summary(1.0, 3.0), 0.01).unwrap();
        let b = total_budget(&summary(1.0, 3.0), 0.005).unwrap();
        assert!((b / a - 4.0).abs() < 1e-3);
    }

    #[test]
    fn budget_sandwich() {
        for &(var, eps, tau) in &[(1.0, 0.1, 3.0), (0.3, 0.7, 11.0), (2.5, 0.01, 1.0), (1e-4, 1.0, 7.0)] {
            let t = total_budget(&summary(var, tau), eps).unwrap();
            let upper = tau + tau * var / (eps * eps);
            assert!(t <= upper * (1.0 + 1e-12));
            assert!(t >= upper / 2.0);
        }
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(optimal_allocation(&[1.0], &[1.0], 0.01).unwrap(), vec![100]);
        let n = optimal_allocation(&[4.0, 1.0], &[1.0, 4.0], 0.001).unwrap();
        assert_eq!(n[0], 4 * n[1]);
        let v = [4.0, 1.0];
        assert!(v.iter().zip(&n).map(|(a, b)| a / *b as f64).sum::<f64>() <= 0.001);
        assert_eq!(optimal_allocation(&[0.0, 1.0], &[1.0, 1.0], 0.1).unwrap()[0], 1);
        assert_eq!(optimal_allocation(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap(), vec![1, 1]);
        assert!(optimal_allocation(&[1.0], &[0.0], 0.1).is_err());
    }

    #[test]
    fn lemma1_examples() {
        let v = 0.37;
        let r = lemma1_check(&[0, 1], &[v], &[v, 0.0], 0.0).unwrap();
        assert!(r.pass);
        assert!((r.lhs - r.rhs).abs() < 1e-15);
        let r = lemma1_check(&[0, 1, 4], &[0.2, 0.9], &[0.0; 5], 0.0).unwrap();
        assert!(r.pass);
        assert!(lemma1_check(&[0, 1], &[1.0], &[0.0, 1.0], 0.0).is_err());
        assert!(lemma1_check(&[0, 1], &[1.0], &[1.0, 0.5], 0.0).is_err());
    }

    #[test]
    fn variance_bound_formula() {
        assert_eq!(tilde_phi_variance_bound(8, 1.5, 1.0), 16.0 * 3.0 / 8.0 * 1.5);
    }
}
