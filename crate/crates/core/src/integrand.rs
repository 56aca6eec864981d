//! Integrands on the unit cube, hybrid (spliced) evaluation, and the two
//! closed-form test families.

use std::any::Any;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::CostLedger;

/// Per-base-point data an integrand may precompute once a suffix source
/// `u'` is fixed, so that later spliced evaluations are cheaper.
pub struct BaseCache {
    /// `f(u')`.
    pub payoff: f64,
    extra: Option<Box<dyn Any + Send + Sync>>,
}

impl BaseCache {
    pub fn new(payoff: f64) -> Self {
        Self {
            payoff,
            extra: None,
        }
    }

    pub fn with_extra<T: Any + Send + Sync>(payoff: f64, extra: T) -> Self {
        Self {
            payoff,
            extra: Some(Box::new(extra)),
        }
    }

    pub fn extra<T: Any>(&self) -> Option<&T> {
        self.extra.as_ref().and_then(|b| b.downcast_ref::<T>())
    }
}

impl fmt::Debug for BaseCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BaseCache")
            .field("payoff", &self.payoff)
            .field("has_extra", &self.extra.is_some())
            .finish()
    }
}

/// A square-integrable function on `[0,1]^d`.
///
/// `value` is the raw deterministic map. The cost-booking entry points are
/// [`eval`] and [`eval_hybrid`]; implementors override `charge_full`,
/// `prepare_base` and `value_spliced` when a splice can reuse work.
pub trait Integrand: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, u: &[f64]) -> f64;

    fn known_mean(&self) -> Option<f64> {
        None
    }

    fn analytic(&self) -> Option<&AnalyticFamily> {
        None
    }

    /// Books the work of one full evaluation.
    fn charge_full(&self, ledger: &mut CostLedger) {
        ledger.charge_payoff();
    }

    /// Evaluates `f(base)` and whatever else later splices against `base` need.
    fn prepare_base(&self, base: &[f64], ledger: &mut CostLedger) -> BaseCache {
        self.charge_full(ledger);
        BaseCache::new(self.value(base))
    }

    /// `f(prefix_1..prefix_m, base_{m+1}..base_d)` where `m = prefix.len()`.
    fn value_spliced(
        &self,
        prefix: &[f64],
        base: &[f64],
        _cache: &BaseCache,
        ledger: &mut CostLedger,
    ) -> f64 {
        let m = prefix.len();
        if m == base.len() {
            self.charge_full(ledger);
            return self.value(prefix);
        }
        let mut x = base.to_vec();
        x[..m].copy_from_slice(prefix);
        self.charge_full(ledger);
        self.value(&x)
    }
}

/// Argument of a hybrid evaluation: first `m` coordinates from `u`, the rest
/// from `u_prime`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridPoint {
    pub u: Vec<f64>,
    pub u_prime: Vec<f64>,
    pub m: usize,
}

impl HybridPoint {
    pub fn new(u: Vec<f64>, u_prime: Vec<f64>, m: usize) -> Self {
        Self { u, u_prime, m }
    }

    pub fn spliced(&self) -> Vec<f64> {
        let mut x = self.u_prime.clone();
        x[..self.m].copy_from_slice(&self.u[..self.m]);
        x
    }
}

fn check_dim(f: &dyn Integrand, len: usize) -> Result<()> {
    if len != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: len,
        });
    }
    Ok(())
}

/// `f(u)`, booking one evaluation.
pub fn eval(f: &dyn Integrand, u: &[f64], ledger: &mut CostLedger) -> Result<f64> {
    check_dim(f, u.len())?;
    f.charge_full(ledger);
    Ok(f.value(u))
}

/// `f` at the spliced point `(u_1..u_m, u'_{m+1}..u'_d)`.
///
/// This is a plain splice for every `m`, including `m = 0` (which gives
/// `f(u')`). The level-0 convention `h_0 = 0` lives in the level schedule,
/// see [`crate::mlmc::LevelSchedule::hybrid`].
pub fn eval_hybrid(f: &dyn Integrand, h: &HybridPoint, ledger: &mut CostLedger) -> Result<f64> {
    check_dim(f, h.u.len())?;
    check_dim(f, h.u_prime.len())?;
    if h.m > f.dim() {
        return Err(Error::invalid(format!(
            "prefix length {} exceeds dimension {}",
            h.m,
            f.dim()
        )));
    }
    f.charge_full(ledger);
    Ok(f.value(&h.spliced()))
}

/// Closed-form test families.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticFamily {
    /// `f(u) = Σ c_i (u_i − 1/2)`
    Additive(Vec<f64>),
    /// `f(u) = Π (1 + c_i (u_i − 1/2))`
    Product(Vec<f64>),
}

impl AnalyticFamily {
    pub fn coeffs(&self) -> &[f64] {
        match self {
            AnalyticFamily::Additive(c) | AnalyticFamily::Product(c) => c,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalyticFamily::Additive(_) => "additive",
            AnalyticFamily::Product(_) => "product",
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            AnalyticFamily::Additive(_) => 0.0,
            AnalyticFamily::Product(_) => 1.0,
        }
    }

    /// σ²_Y for the subset `y` (1-based coordinate indices).
    pub fn sigma2(&self, y: &[usize]) -> f64 {
        if y.is_empty() {
            return 0.0;
        }
        let c = self.coeffs();
        match self {
            AnalyticFamily::Additive(_) => {
                if y.len() == 1 {
                    c[y[0] - 1].powi(2) / 12.0
                } else {
                    0.0
                }
            }
            AnalyticFamily::Product(_) => y.iter().map(|&i| c[i - 1].powi(2) / 12.0).product(),
        }
    }

    /// `w_k = Σ_{Y : max(Y) = k} σ²_Y` for `k = 1..=d` (index `k-1`).
    pub fn max_index_weights(&self) -> Vec<f64> {
        let c = self.coeffs();
        match self {
            AnalyticFamily::Additive(_) => c.iter().map(|ci| ci * ci / 12.0).collect(),
            AnalyticFamily::Product(_) => {
                let mut prefix = 1.0;
                let mut w = Vec::with_capacity(c.len());
                for ci in c {
                    let s = ci * ci / 12.0;
                    w.push(s * prefix);
                    prefix *= 1.0 + s;
                }
                w
            }
        }
    }

    /// ANOVA component `f_Y(u)`.
    pub fn component(&self, y: &[usize], u: &[f64]) -> f64 {
        if y.is_empty() {
            return self.mean();
        }
        let c = self.coeffs();
        match self {
            AnalyticFamily::Additive(_) => {
                if y.len() == 1 {
                    c[y[0] - 1] * (u[y[0] - 1] - 0.5)
                } else {
                    0.0
                }
            }
            AnalyticFamily::Product(_) => y.iter().map(|&i| c[i - 1] * (u[i - 1] - 0.5)).product(),
        }
    }

    fn evaluate(&self, u: &[f64]) -> f64 {
        match self {
            AnalyticFamily::Additive(c) => c.iter().zip(u).map(|(ci, ui)| ci * (ui - 0.5)).sum(),
            AnalyticFamily::Product(c) => c
                .iter()
                .zip(u)
                .map(|(ci, ui)| 1.0 + ci * (ui - 0.5))
                .product(),
        }
    }
}

/// An integrand from one of the analytic families.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticIntegrand {
    family: AnalyticFamily,
}

impl AnalyticIntegrand {
    pub fn family(&self) -> &AnalyticFamily {
        &self.family
    }
}

impl Integrand for AnalyticIntegrand {
    fn dim(&self) -> usize {
        self.family.coeffs().len()
    }

    fn value(&self, u: &[f64]) -> f64 {
        self.family.evaluate(u)
    }

    fn known_mean(&self) -> Option<f64> {
        Some(self.family.mean())
    }

    fn analytic(&self) -> Option<&AnalyticFamily> {
        Some(&self.family)
    }
}

fn validate_coeffs(c: &[f64]) -> Result<()> {
    if c.is_empty() {
        return Err(Error::invalid("coefficient vector is empty"));
    }
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("coefficients must be finite"));
    }
    if c.iter().all(|&x| x == 0.0) {
        return Err(Error::invalid("all-zero coefficients give zero variance"));
    }
    Ok(())
}

/// `f(u) = Σ c_i (u_i − 1/2)`, mean 0.
pub fn make_additive(c: Vec<f64>) -> Result<AnalyticIntegrand> {
    validate_coeffs(&c)?;
    Ok(AnalyticIntegrand {
        family: AnalyticFamily::Additive(c),
    })
}

/// `f(u) = Π (1 + c_i (u_i − 1/2))`, mean 1, with every `c_i ∈ (−1, 1]`.
pub fn make_product(c: Vec<f64>) -> Result<AnalyticIntegrand> {
    validate_coeffs(&c)?;
    if let Some(bad) = c.iter().find(|&&x| x <= -1.0 || x > 1.0) {
        return Err(Error::invalid(format!(
            "product coefficients must lie in (-1, 1], got {bad}"
        )));
    }
    Ok(AnalyticIntegrand {
        family: AnalyticFamily::Product(c),
    })
}

/// `c_i = r^{i−1}` for `i = 1..=d`.
pub fn geometric_coeffs(d: usize, r: f64) -> Vec<f64> {
    (0..d).map(|i| r.powi(i as i32)).collect()
}

type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Black-box integrand backed by a closure.
#[derive(Clone)]
pub struct FnIntegrand {
    dim: usize,
    f: PointFn,
    mean: Option<f64>,
}

impl FnIntegrand {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            f: Arc::new(f),
            mean: None,
        }
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.mean = Some(mean);
        self
    }
}

impl fmt::Debug for FnIntegrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnIntegrand")
            .field("dim", &self.dim)
            .field("mean", &self.mean)
            .finish()
    }
}

impl Integrand for FnIntegrand {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, u: &[f64]) -> f64 {
        (self.f)(u)
    }

    fn known_mean(&self) -> Option<f64> {
        self.mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::UniformStream;
    use proptest::prelude::*;

    fn ledger() -> CostLedger {
        CostLedger::new()
    }

    #[test]
    fn additive_pointwise() {
        let f = make_additive(vec![1.0, 1.0]).unwrap();
        let mut l = ledger();
        assert_eq!(eval(&f, &[0.5, 0.5], &mut l).unwrap(), 0.0);
        assert_eq!(eval(&f, &[1.0, 0.0], &mut l).unwrap(), 0.0);
        assert_eq!(l.payoff_evals, 2);
    }

    #[test]
    fn product_pointwise() {
        let f = make_product(vec![1.0, 1.0]).unwrap();
        let mut l = ledger();
        assert_eq!(eval(&f, &[1.0, 1.0], &mut l).unwrap(), 2.25);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let f = make_additive(vec![1.0, 1.0]).unwrap();
        let err = eval(&f, &[0.1], &mut ledger()).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, got: 1 });
        let h = HybridPoint::new(vec![0.1, 0.2], vec![0.3], 1);
        assert!(eval_hybrid(&f, &h, &mut ledger()).is_err());
    }

    #[test]
    fn hybrid_splices_prefix_and_suffix() {
        let f = make_additive(vec![1.0, 1.0]).unwrap();
        // u_1 = 1 from u, u'_2 = 0 from u'
        let h = HybridPoint::new(vec![1.0, 0.7], vec![0.2, 0.0], 1);
        assert_eq!(eval_hybrid(&f, &h, &mut ledger()).unwrap(), 0.0);
        assert_eq!(h.spliced(), vec![1.0, 0.0]);
    }

    #[test]
    fn hybrid_full_prefix_is_plain_eval() {
        let f = make_product(vec![0.3, -0.4, 0.9]).unwrap();
        let u = vec![0.1, 0.8, 0.35];
        let h = HybridPoint::new(u.clone(), vec![0.9, 0.9, 0.9], 3);
        let mut l = ledger();
        assert_eq!(eval_hybrid(&f, &h, &mut l).unwrap(), eval(&f, &u, &mut l).unwrap());
    }

    #[test]
    fn zero_coefficients_rejected() {
        assert!(make_additive(vec![0.0, 0.0]).is_err());
        assert!(make_product(vec![0.0]).is_err());
        assert!(make_product(vec![-1.0, 0.5]).is_err());
        assert!(make_product(vec![1.5]).is_err());
        assert!(make_product(vec![1.0, -0.99]).is_ok());
    }

    #[test]
    fn single_variable_product() {
        let f = make_product(vec![1.0]).unwrap();
        assert_eq!(f.value(&[0.25]), 0.75);
        assert_eq!(f.known_mean(), Some(1.0));
    }

    #[test]
    fn geometric_preset() {
        assert_eq!(geometric_coeffs(4, 0.5), vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn analytic_weights_small_cases() {
        let a = AnalyticFamily::Additive(vec![1.0, 1.0]);
        assert_eq!(a.max_index_weights(), vec![1.0 / 12.0, 1.0 / 12.0]);
        let p = AnalyticFamily::Product(vec![1.0, 1.0]);
        let w = p.max_index_weights();
        assert!((w[0] - 12.0 / 144.0).abs() < 1e-15);
        assert!((w[1] - 13.0 / 144.0).abs() < 1e-15);
        assert!((p.sigma2(&[1, 2]) - 1.0 / 144.0).abs() < 1e-15);
        assert_eq!(a.sigma2(&[1, 2]), 0.0);
    }

    fn sample_mean_and_se(f: &dyn Integrand, n: usize, seed: u64) -> (f64, f64) {
        let mut s = UniformStream::new(seed);
        let mut u = vec![0.0; f.dim()];
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            s.fill(&mut u);
            let y = f.value(&u);
            sum += y;
            sum2 += y * y;
        }
        let m = sum / n as f64;
        let var = (sum2 - n as f64 * m * m) / (n as f64 - 1.0);
        (m, (var / n as f64).sqrt())
    }

    #[test]
    fn sample_means_match_known_means() {
        let fams: Vec<AnalyticIntegrand> = vec![
            make_additive(geometric_coeffs(6, 0.5)).unwrap(),
            make_product(geometric_coeffs(6, 0.5)).unwrap(),
        ];
        for (k, f) in fams.iter().enumerate() {
            let (m, se) = sample_mean_and_se(f, 100_000, 11 + k as u64);
            assert!((m - f.known_mean().unwrap()).abs() < 4.0 * se);
        }
    }

    #[test]
    fn main_effects_are_uncorrelated() {
        for fam in [
            AnalyticFamily::Additive(vec![1.0, 0.7, 0.2]),
            AnalyticFamily::Product(vec![1.0, 0.7, 0.2]),
        ] {
            let mut s = UniformStream::new(5);
            let n = 100_000;
            let mut u = vec![0.0; 3];
            let mut prods = Vec::with_capacity(n);
            for _ in 0..n {
                s.fill(&mut u);
                prods.push(fam.component(&[1], &u) * fam.component(&[2], &u));
            }
            let m = prods.iter().sum::<f64>() / n as f64;
            let v = prods.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            assert!(m.abs() < 4.0 * (v / n as f64).sqrt());
        }
    }

    proptest! {
        #[test]
        fn splice_identity(
            u in prop::collection::vec(0.0f64..1.0, 5),
            up in prop::collection::vec(0.0f64..1.0, 5),
            m in 0usize..=5,
        ) {
            let f = make_product(vec![0.9, -0.5, 0.3, 0.2, 1.0]).unwrap();
            let mut l = CostLedger::new();
            let full = HybridPoint::new(u.clone(), up.clone(), 5);
            prop_assert_eq!(eval_hybrid(&f, &full, &mut l).unwrap(), f.value(&u));
            let same = HybridPoint::new(up.clone(), up.clone(), m);
            prop_assert_eq!(eval_hybrid(&f, &same, &mut l).unwrap(), f.value(&up));
            let cache = f.prepare_base(&up, &mut l);
            let via_cache = f.value_spliced(&u[..m], &up, &cache, &mut l);
            prop_assert_eq!(via_cache, f.value(&HybridPoint::new(u.clone(), up.clone(), m).spliced()));
        }
    }
}
