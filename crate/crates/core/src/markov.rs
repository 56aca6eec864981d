//! Time-varying Markov chain functionals.
//!
//! A chain `X_{i+1} = g_i(X_i, Y_i)` driven by `d` uniforms is estimated
//! through restart couplings: `X^(i)` starts from `X_0` at time `d − i` and is
//! driven by the same final `i` uniforms as the original chain. Reindexing
//! `U_i = Y_{d−i}` turns `g(X_d)` into an integrand whose leading coordinates
//! are the most recent innovations.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrand::{BaseCache, Integrand};
use crate::mlmc::{ceil_log2, EstimateRecord, LevelSchedule, LevelStat};
use crate::rng::{CostLedger, UniformStream};
use crate::stats::{linear_fit, LinearFit, Moments};

/// A time-varying chain with constant-cost steps and payoff.
pub trait ChainModel: Send + Sync {
    type State: Clone + Send + Sync + 'static;

    /// Number of steps `d`.
    fn horizon(&self) -> usize;
    fn initial_state(&self) -> Self::State;
    /// `g_i(x, y)`.
    fn step(&self, i: usize, x: &Self::State, y: f64) -> Self::State;
    /// `g(x)`.
    fn payoff(&self, x: &Self::State) -> f64;
}

/// States `X_0..=X_d`, the uniforms `Y_0..Y_{d−1}` that drove them, and `g(X_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub states: Vec<S>,
    pub uniforms: Vec<f64>,
    pub payoff: f64,
}

pub fn simulate_chain<M: ChainModel>(
    model: &M,
    stream: &mut UniformStream,
    ledger: &mut CostLedger,
) -> Trajectory<M::State> {
    let d = model.horizon();
    let mut uniforms = vec![0.0; d];
    ledger.draw_into(stream, &mut uniforms);
    let mut states = Vec::with_capacity(d + 1);
    states.push(model.initial_state());
    for (i, &y) in uniforms.iter().enumerate() {
        let next = model.step(i, &states[i], y);
        states.push(next);
    }
    ledger.charge_steps(d);
    ledger.charge_payoff();
    let payoff = model.payoff(&states[d]);
    Trajectory {
        states,
        uniforms,
        payoff,
    }
}

/// Runs steps `start..d` from `x` with `uniforms[k]` driving step `start + k`.
fn run_from<M: ChainModel>(model: &M, start: usize, mut x: M::State, uniforms: &[f64]) -> M::State {
    for (k, &y) in uniforms.iter().enumerate() {
        x = model.step(start + k, &x, y);
    }
    x
}

/// `g(X^(i)_d)` where `uniforms` are `Y_{d−i}..Y_{d−1}` and `i = uniforms.len()`.
pub fn simulate_restart<M: ChainModel>(model: &M, uniforms: &[f64], ledger: &mut CostLedger) -> Result<f64> {
    let d = model.horizon();
    let i = uniforms.len();
    if i > d {
        return Err(Error::invalid(format!("restart length {i} exceeds horizon {d}")));
    }
    let x = run_from(model, d - i, model.initial_state(), uniforms);
    ledger.charge_steps(i);
    ledger.charge_payoff();
    Ok(model.payoff(&x))
}

/// `φ_hi − φ_lo` with `φ_m = g(X^(m)_d)` and `φ_0 = 0`, both restarts driven by
/// the same trailing uniforms.
pub fn coupled_level_pair<M: ChainModel>(
    model: &M,
    m_hi: usize,
    m_lo: usize,
    stream: &mut UniformStream,
    ledger: &mut CostLedger,
) -> Result<f64> {
    let d = model.horizon();
    if m_lo >= m_hi || m_hi > d {
        return Err(Error::invalid(format!(
            "need 0 <= m_lo < m_hi <= d, got m_lo={m_lo}, m_hi={m_hi}, d={d}"
        )));
    }
    let mut ys = vec![0.0; m_hi];
    ledger.draw_into(stream, &mut ys);
    Ok(level_difference(model, &ys, m_lo, ledger))
}

fn level_difference<M: ChainModel>(model: &M, ys: &[f64], m_lo: usize, ledger: &mut CostLedger) -> f64 {
    let m_hi = ys.len();
    let hi = simulate_restart(model, ys, ledger).expect("length checked");
    let lo = if m_lo == 0 {
        0.0
    } else {
        simulate_restart(model, &ys[m_hi - m_lo..], ledger).expect("length checked")
    };
    hi - lo
}

/// `L = ⌈log₂ d⌉`, `m_l = 2^l − 1` for `l < L`, `m_L = d`,
/// `n_l = ⌈d · 2^{l(γ−1)/2}⌉`.
pub fn markov_schedule(d: usize, gamma: f64) -> Result<LevelSchedule> {
    if d < 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    if !(gamma < -1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    let levels = ceil_log2(d);
    let mut m: Vec<usize> = (0..levels).map(|l| (1usize << l) - 1).collect();
    m.push(d);
    let n = (1..=levels)
        .map(|l| {
            let x = d as f64 * (l as f64 * (gamma - 1.0) / 2.0).exp2();
            let r = x.round();
            let c = if (x - r).abs() <= 1e-9 * r.max(1.0) { r } else { x.ceil() };
            c.max(1.0) as usize
        })
        .collect();
    LevelSchedule::new(m, n)
}

/// One replication of the chain estimator with the given schedule; level `l`
/// draws from `stream.fork(l)` and levels are independent.
pub fn estimate_markov_mlmc_with<M: ChainModel>(
    model: &M,
    schedule: &LevelSchedule,
    stream: &mut UniformStream,
) -> Result<EstimateRecord> {
    if schedule.dim() != model.horizon() {
        return Err(Error::DimensionMismatch {
            expected: model.horizon(),
            got: schedule.dim(),
        });
    }
    let mut ledger = CostLedger::new();
    let mut value = 0.0;
    let mut per_level = Vec::with_capacity(schedule.levels());
    let mut ys = vec![0.0; model.horizon()];
    for l in 1..=schedule.levels() {
        let mut s = stream.fork(l as u64);
        let (m_hi, m_lo) = (schedule.m(l), schedule.m(l - 1));
        let mut st = LevelStat {
            level: l,
            count: 0,
            sum: 0.0,
            sum_sq: 0.0,
        };
        for _ in 0..schedule.n(l) {
            ledger.draw_into(&mut s, &mut ys[..m_hi]);
            let x = level_difference(model, &ys[..m_hi], m_lo, &mut ledger);
            st.count += 1;
            st.sum += x;
            st.sum_sq += x * x;
        }
        value += st.mean();
        per_level.push(st);
    }
    Ok(EstimateRecord {
        value,
        cost: ledger,
        per_level,
    })
}

pub fn estimate_markov_mlmc<M: ChainModel>(
    model: &M,
    gamma: f64,
    stream: &mut UniformStream,
) -> Result<EstimateRecord> {
    let schedule = markov_schedule(model.horizon(), gamma)?;
    estimate_markov_mlmc_with(model, &schedule, stream)
}

/// `n` independent full-chain payoffs averaged: the standard Monte Carlo
/// reference.
pub fn standard_mc_chain<M: ChainModel>(model: &M, n: usize, stream: &mut UniformStream) -> Result<EstimateRecord> {
    if n == 0 {
        return Err(Error::invalid("need n >= 1"));
    }
    let mut ledger = CostLedger::new();
    let mut st = LevelStat {
        level: 1,
        count: 0,
        sum: 0.0,
        sum_sq: 0.0,
    };
    for _ in 0..n {
        let t = simulate_chain(model, stream, &mut ledger);
        st.count += 1;
        st.sum += t.payoff;
        st.sum_sq += t.payoff * t.payoff;
    }
    Ok(EstimateRecord {
        value: st.mean(),
        cost: ledger,
        per_level: vec![st],
    })
}

/// Measured `E[(g(X_d) − g(X^(i)_d))²]` and fitted decay laws.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub i_values: Vec<usize>,
    pub msd: Vec<f64>,
    pub se: Vec<f64>,
    /// `ln msd` against `i`; slope is `ln κ̂`.
    pub geometric: Option<LinearFit>,
    /// `ln msd` against `ln(i+1)`; slope is `γ̂`.
    pub power: Option<LinearFit>,
}

impl DecayReport {
    pub fn kappa(&self) -> Option<f64> {
        self.geometric.map(|f| f.slope.exp())
    }

    pub fn fitted_gamma(&self) -> Option<f64> {
        self.power.map(|f| f.slope)
    }

    pub fn fitted_c_prime(&self) -> Option<f64> {
        self.power.map(|f| f.intercept.exp())
    }
}

/// For each `i`, couples a full chain with its `i`-step restart on shared
/// trailing uniforms (`stream.fork(i)`, `n` samples).
pub fn measure_decay<M: ChainModel>(
    model: &M,
    i_values: &[usize],
    n: usize,
    stream: &UniformStream,
) -> Result<DecayReport> {
    let d = model.horizon();
    if n < 2 {
        return Err(Error::invalid("measure_decay needs n >= 2"));
    }
    if let Some(&bad) = i_values.iter().find(|&&i| i > d) {
        return Err(Error::invalid(format!("i = {bad} exceeds horizon {d}")));
    }
    let est: Vec<(f64, f64)> = i_values
        .par_iter()
        .map(|&i| {
            let mut s = stream.fork(i as u64);
            let mut ledger = CostLedger::new();
            let m: Moments = (0..n)
                .map(|_| {
                    let t = simulate_chain(model, &mut s, &mut ledger);
                    let r = simulate_restart(model, &t.uniforms[d - i..], &mut ledger).expect("i <= d");
                    (t.payoff - r).powi(2)
                })
                .collect();
            (m.mean, m.std_error())
        })
        .collect();
    let msd: Vec<f64> = est.iter().map(|e| e.0).collect();
    let se: Vec<f64> = est.iter().map(|e| e.1).collect();
    let (mut xi, mut xl, mut ys) = (Vec::new(), Vec::new(), Vec::new());
    for (&i, &m) in i_values.iter().zip(&msd) {
        if m > 0.0 {
            xi.push(i as f64);
            xl.push((i as f64 + 1.0).ln());
            ys.push(m.ln());
        }
    }
    Ok(DecayReport {
        i_values: i_values.to_vec(),
        msd,
        se,
        geometric: linear_fit(&xi, &ys),
        power: linear_fit(&xl, &ys),
    })
}

/// Power-law exponent from a pilot decay run, clamped to at most −1.01.
pub fn calibrate_gamma<M: ChainModel>(model: &M, pilot_n: usize, stream: &UniformStream) -> Result<f64> {
    let d = model.horizon();
    let mut is: Vec<usize> = std::iter::successors(Some(1usize), |&i| Some(i * 2))
        .take_while(|&i| i < d)
        .collect();
    is.push(d);
    let rep = measure_decay(model, &is, pilot_n, stream)?;
    let g = rep.fitted_gamma().unwrap_or(-2.0);
    Ok(if g.is_finite() { g.min(-1.01) } else { -2.0 })
}

/// Restarts the final `i` steps of a cached trajectory with fresh uniforms.
pub fn prefix_redraw_payoff<M: ChainModel>(
    model: &M,
    cached: &Trajectory<M::State>,
    i: usize,
    stream: &mut UniformStream,
    ledger: &mut CostLedger,
) -> Result<f64> {
    let d = model.horizon();
    if i > d || cached.states.len() != d + 1 {
        return Err(Error::invalid(format!("redraw length {i} incompatible with horizon {d}")));
    }
    if i == 0 {
        return Ok(cached.payoff);
    }
    let mut ys = vec![0.0; i];
    ledger.draw_into(stream, &mut ys);
    let x = run_from(model, d - i, cached.states[d - i].clone(), &ys);
    ledger.charge_steps(i);
    ledger.charge_payoff();
    Ok(model.payoff(&x))
}

/// `d_t · Var g(X_d) ≤ c′ γ / (γ + 1)`; the right side for given constants.
pub fn truncation_bound(c_prime: f64, gamma: f64) -> f64 {
    c_prime * gamma / (gamma + 1.0)
}

/// Increment quantile functions `ζ_i`.
#[derive(Clone)]
pub enum Zeta {
    /// `ζ_i(y) = a + (b − a) y` for every `i`.
    Uniform { a: f64, b: f64 },
    /// Uniform increments whose lower end moves as `a + amplitude · sin(2π i / period)`.
    TimeVarying { a: f64, b: f64, amplitude: f64, period: f64 },
    Constant(f64),
    Custom(Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>),
}

impl Zeta {
    /// Lower/upper ends at step `i` for the uniform variants.
    pub fn bounds(&self, i: usize) -> Option<(f64, f64)> {
        match *self {
            Zeta::Uniform { a, b } => Some((a, b)),
            Zeta::TimeVarying {
                a,
                b,
                amplitude,
                period,
            } => {
                let phase = 2.0 * std::f64::consts::PI * i as f64 / period;
                Some((a + amplitude * phase.sin(), b))
            }
            Zeta::Constant(c) => Some((c, c)),
            Zeta::Custom(_) => None,
        }
    }

    pub fn quantile(&self, i: usize, y: f64) -> f64 {
        match self {
            Zeta::Custom(f) => f(i, y),
            Zeta::Constant(c) => *c,
            _ => {
                let (a, b) = self.bounds(i).expect("uniform variant");
                a + (b - a) * y
            }
        }
    }
}

impl fmt::Debug for Zeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Zeta::Uniform { a, b } => write!(f, "Uniform({a}, {b})"),
            Zeta::TimeVarying {
                a,
                b,
                amplitude,
                period,
            } => write!(f, "TimeVarying({a}, {b}, amp={amplitude}, period={period})"),
            Zeta::Constant(c) => write!(f, "Constant({c})"),
            Zeta::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Default increment range, negative drift −0.1.
pub const LINDLEY_A: f64 = -0.6;
pub const LINDLEY_B: f64 = 0.4;
pub const TIME_VARYING_AMPLITUDE: f64 = 0.1;
pub const TIME_VARYING_PERIOD: f64 = 24.0;

/// `X_{i+1} = (X_i + ζ_i(Y_i))⁺`, `X_0 = 0`, payoff `g(x) = x`.
#[derive(Debug, Clone)]
pub struct Lindley {
    horizon: usize,
    zeta: Zeta,
}

impl Lindley {
    pub fn preset(d: usize) -> Self {
        make_lindley(
            d,
            Zeta::Uniform {
                a: LINDLEY_A,
                b: LINDLEY_B,
            },
        )
    }

    pub fn time_varying(d: usize) -> Self {
        make_lindley(
            d,
            Zeta::TimeVarying {
                a: LINDLEY_A,
                b: LINDLEY_B,
                amplitude: TIME_VARYING_AMPLITUDE,
                period: TIME_VARYING_PERIOD,
            },
        )
    }

    pub fn zeta(&self) -> &Zeta {
        &self.zeta
    }

    /// Same increments over a different horizon.
    pub fn with_horizon(&self, d: usize) -> Self {
        Self {
            horizon: d,
            zeta: self.zeta.clone(),
        }
    }
}

pub fn make_lindley(d: usize, zeta: Zeta) -> Lindley {
    Lindley { horizon: d, zeta }
}

impl ChainModel for Lindley {
    type State = f64;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn initial_state(&self) -> f64 {
        0.0
    }

    #[inline]
    fn step(&self, i: usize, x: &f64, y: f64) -> f64 {
        (x + self.zeta.quantile(i, y)).max(0.0)
    }

    fn payoff(&self, x: &f64) -> f64 {
        *x
    }
}

/// Real-valued chain built from closures.
#[derive(Clone)]
pub struct FnChain {
    horizon: usize,
    x0: f64,
    step: Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>,
    payoff: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl FnChain {
    pub fn new(
        horizon: usize,
        x0: f64,
        step: impl Fn(usize, f64, f64) -> f64 + Send + Sync + 'static,
        payoff: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            horizon,
            x0,
            step: Arc::new(step),
            payoff: Arc::new(payoff),
        }
    }
}

impl fmt::Debug for FnChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnChain")
            .field("horizon", &self.horizon)
            .field("x0", &self.x0)
            .finish()
    }
}

impl ChainModel for FnChain {
    type State = f64;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn initial_state(&self) -> f64 {
        self.x0
    }

    fn step(&self, i: usize, x: &f64, y: f64) -> f64 {
        (self.step)(i, *x, y)
    }

    fn payoff(&self, x: &f64) -> f64 {
        (self.payoff)(*x)
    }
}

/// Composite Simpson estimate of `∫₀¹ exp(θ ζ(y)) dy`.
pub fn check_drift(zeta: &dyn Fn(f64) -> f64, theta: f64, resolution: usize) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::invalid("theta must be positive"));
    }
    let n = resolution.max(2).next_multiple_of(2);
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let y = k as f64 * h;
        let v = (theta * zeta(y)).exp();
        if !v.is_finite() {
            return Err(Error::Numerical(format!("drift integrand at y={y}")));
        }
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * v;
    }
    Ok(acc * h / 3.0)
}

/// `g(X_d)` as a function on `[0,1]^d` through `U_i = Y_{d−i}`.
///
/// Spliced evaluations against a prepared base reuse the base trajectory, so
/// replacing the first `m` coordinates costs `m` steps.
#[derive(Debug, Clone)]
pub struct ChainIntegrand<M> {
    model: M,
}

impl<M: ChainModel> ChainIntegrand<M> {
    pub fn new(model: M) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &M {
        &self.model
    }
}

impl<M: ChainModel> Integrand for ChainIntegrand<M> {
    fn dim(&self) -> usize {
        self.model.horizon()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let d = self.dim();
        let mut x = self.model.initial_state();
        for j in 0..d {
            x = self.model.step(j, &x, u[d - 1 - j]);
        }
        self.model.payoff(&x)
    }

    fn charge_full(&self, ledger: &mut CostLedger) {
        ledger.charge_steps(self.dim());
        ledger.charge_payoff();
    }

    fn prepare_base(&self, base: &[f64], ledger: &mut CostLedger) -> BaseCache {
        let d = self.dim();
        let mut states = Vec::with_capacity(d + 1);
        states.push(self.model.initial_state());
        for j in 0..d {
            let next = self.model.step(j, &states[j], base[d - 1 - j]);
            states.push(next);
        }
        self.charge_full(ledger);
        let payoff = self.model.payoff(&states[d]);
        BaseCache::with_extra(payoff, states)
    }

    fn value_spliced(&self, prefix: &[f64], base: &[f64], cache: &BaseCache, ledger: &mut CostLedger) -> f64 {
        let d = self.dim();
        let m = prefix.len();
        let Some(states) = cache.extra::<Vec<M::State>>() else {
            let mut x = base.to_vec();
            x[..m].copy_from_slice(prefix);
            self.charge_full(ledger);
            return self.value(&x);
        };
        let mut x = states[d - m].clone();
        for j in d - m..d {
            x = self.model.step(j, &x, prefix[d - 1 - j]);
        }
        ledger.charge_steps(m);
        ledger.charge_payoff();
        self.model.payoff(&x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::HybridPoint;

    fn constant(d: usize, c: f64) -> Lindley {
        make_lindley(d, Zeta::Constant(c))
    }

    #[test]
    fn deterministic_lindley_paths() {
        let mut l = CostLedger::new();
        let t = simulate_chain(&constant(10, -1.0), &mut UniformStream::new(0), &mut l);
        assert!(t.states.iter().all(|&x| x == 0.0));
        assert_eq!(t.payoff, 0.0);
        let t = simulate_chain(&constant(10, 1.0), &mut UniformStream::new(0), &mut l);
        assert_eq!(t.payoff, 10.0);
        assert_eq!(t.states.len(), 11);
        assert_eq!(t.states[0], 0.0);
        let t = simulate_chain(&constant(7, 0.0), &mut UniformStream::new(0), &mut l);
        assert_eq!(t.payoff, 0.0);
    }

    #[test]
    fn simulate_chain_cost() {
        let mut l = CostLedger::new();
        simulate_chain(&Lindley::preset(13), &mut UniformStream::new(1), &mut l);
        assert_eq!(l.coordinate_draws, 13);
        assert_eq!(l.step_applications, 13);
        assert_eq!(l.payoff_evals, 1);
    }

    #[test]
    fn one_step_preset() {
        let m = Lindley::preset(1);
        assert!((m.step(0, &0.0, 0.9) - 0.3).abs() < 1e-15);
        assert_eq!(m.step(0, &0.0, 0.1), 0.0);
    }

    #[test]
    fn restart_examples() {
        let m = Lindley::preset(20);
        let mut l = CostLedger::new();
        let t = simulate_chain(&m, &mut UniformStream::new(3), &mut l);
        assert_eq!(simulate_restart(&m, &t.uniforms, &mut l).unwrap(), t.payoff);
        assert_eq!(simulate_restart(&m, &[], &mut l).unwrap(), 0.0);
        let y = 0.83;
        let r = simulate_restart(&m, &[y], &mut l).unwrap();
        assert_eq!(r, (0.0 + LINDLEY_A + (LINDLEY_B - LINDLEY_A) * y).max(0.0));
        assert!(simulate_restart(&m, &[0.5; 21], &mut l).is_err());
    }

    #[test]
    fn restart_cost_is_linear() {
        let m = Lindley::preset(50);
        let mut l = CostLedger::new();
        simulate_restart(&m, &[0.5; 7], &mut l).unwrap();
        assert_eq!(l.step_applications, 7);
    }

    #[test]
    fn coupled_pair_two_step_hand_computation() {
        let m = Lindley::preset(2);
        let mut s = UniformStream::new(17);
        let ys = s.clone().draw(2);
        let z = |y: f64| LINDLEY_A + (LINDLEY_B - LINDLEY_A) * y;
        let expected = (z(ys[0]).max(0.0) + z(ys[1])).max(0.0) - z(ys[1]).max(0.0);
        let got = coupled_level_pair(&m, 2, 1, &mut s, &mut CostLedger::new()).unwrap();
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn coupled_pair_level_zero_is_single_restart() {
        let m = Lindley::preset(8);
        let mut s = UniformStream::new(5);
        let ys = s.clone().draw(3);
        let got = coupled_level_pair(&m, 3, 0, &mut s, &mut CostLedger::new()).unwrap();
        assert_eq!(got, simulate_restart(&m, &ys, &mut CostLedger::new()).unwrap());
        assert!(coupled_level_pair(&m, 3, 3, &mut s, &mut CostLedger::new()).is_err());
        assert!(coupled_level_pair(&m, 9, 3, &mut s, &mut CostLedger::new()).is_err());
    }

    #[test]
    fn state_forgetting_pairs_vanish() {
        // g_i ignores x: X_d depends on Y_{d-1} only
        let chain = FnChain::new(16, 0.0, |_, _, y| y, |x| x);
        let mut s = UniformStream::new(2);
        for (hi, lo) in [(16, 8), (3, 1), (16, 1)] {
            let x = coupled_level_pair(&chain, hi, lo, &mut s, &mut CostLedger::new()).unwrap();
            assert_eq!(x, 0.0);
        }
    }

    #[test]
    fn markov_schedule_examples() {
        let s = markov_schedule(64, -2.0).unwrap();
        assert_eq!(s.levels(), 6);
        assert_eq!(s.replications(), &[23, 8, 3, 1, 1, 1]);
        assert_eq!(s.prefix_lengths(), &[0, 1, 3, 7, 15, 31, 64]);
        let s = markov_schedule(4, -3.0).unwrap();
        assert_eq!(s.replications(), &[1, 1]);
        assert_eq!(s.prefix_lengths(), &[0, 1, 4]);
        assert_eq!(markov_schedule(16, -1.0).unwrap_err(), Error::InvalidGamma(-1.0));
        assert!(markov_schedule(16, -0.5).is_err());
        assert!(markov_schedule(1, -2.0).is_err());
    }

    #[test]
    fn markov_estimator_step_accounting() {
        let m = Lindley::preset(64);
        let sched = markov_schedule(64, -2.0).unwrap();
        let rec = estimate_markov_mlmc(&m, -2.0, &mut UniformStream::new(8)).unwrap();
        let bound: u64 = (1..=sched.levels())
            .map(|l| (sched.n(l) * (sched.m(l) + sched.m(l - 1))) as u64)
            .sum();
        assert_eq!(rec.cost.step_applications, bound);
        assert_eq!(rec.cost.coordinate_draws, sched.prefix_draws());
    }

    #[test]
    fn forgetting_chain_collapses_to_level_one() {
        let chain = FnChain::new(32, 0.0, |_, _, y| y, |x| x);
        let rec = estimate_markov_mlmc(&chain, -2.0, &mut UniformStream::new(1)).unwrap();
        for st in &rec.per_level[1..] {
            assert_eq!(st.sum_sq, 0.0);
        }
    }

    #[test]
    fn decay_endpoints() {
        let m = Lindley::preset(16);
        let rep = measure_decay(&m, &[0, 4, 16], 2000, &UniformStream::new(4)).unwrap();
        assert_eq!(rep.msd[2], 0.0);
        assert!(rep.msd[0] > rep.msd[1]);
        let memoryless = FnChain::new(16, 0.0, |_, _, y| y, |x| x);
        let rep = measure_decay(&memoryless, &[1, 2, 8, 16], 500, &UniformStream::new(4)).unwrap();
        assert!(rep.msd.iter().all(|&x| x == 0.0));
        assert!(measure_decay(&m, &[17], 10, &UniformStream::new(0)).is_err());
    }

    #[test]
    fn prefix_redraw_contract() {
        let m = Lindley::preset(40);
        let mut l = CostLedger::new();
        let t = simulate_chain(&m, &mut UniformStream::new(6), &mut l);
        let mut s = UniformStream::new(7);
        let mut l0 = CostLedger::new();
        assert_eq!(prefix_redraw_payoff(&m, &t, 0, &mut s, &mut l0).unwrap(), t.payoff);
        assert_eq!(l0.total(), 0);
        for i in [1, 9, 40] {
            let mut li = CostLedger::new();
            prefix_redraw_payoff(&m, &t, i, &mut s, &mut li).unwrap();
            assert_eq!(li.coordinate_draws, i as u64);
            assert_eq!(li.step_applications, i as u64);
            assert_eq!(li.payoff_evals, 1);
        }
        // i = d reproduces a fresh chain on the same uniforms
        let fresh = s.clone();
        let redraw = prefix_redraw_payoff(&m, &t, 40, &mut s, &mut l).unwrap();
        let full = simulate_chain(&m, &mut fresh.clone(), &mut l).payoff;
        assert_eq!(redraw, full);
    }

    #[test]
    fn drift_integral_examples() {
        let preset = |y: f64| LINDLEY_A + (LINDLEY_B - LINDLEY_A) * y;
        let v = check_drift(&preset, 1.0, 1000).unwrap();
        let closed = (0.4f64.exp() - (-0.6f64).exp()) / 1.0;
        assert!((v - closed).abs() < 1e-6);
        assert!((v - 0.9430).abs() < 1e-4);
        assert!((check_drift(&|_| 0.0, 2.5, 10).unwrap() - 1.0).abs() < 1e-15);
        assert!((check_drift(&|_| -1.0, 1.0, 10).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(check_drift(&|_| 0.0, 0.0, 10).is_err());
        assert!(check_drift(&|y| 1e6 * y, 1.0, 10).is_err());
    }

    #[test]
    fn time_varying_preset_keeps_drift_condition() {
        let m = Lindley::time_varying(48);
        for i in 0..48 {
            let z = |y: f64| m.zeta().quantile(i, y);
            assert!(check_drift(&z, 1.0, 200).unwrap() < 1.0);
        }
    }

    #[test]
    fn chain_integrand_matches_chain() {
        let m = Lindley::time_varying(12);
        let f = ChainIntegrand::new(m.clone());
        let mut s = UniformStream::new(33);
        let t = simulate_chain(&m, &mut s.clone(), &mut CostLedger::new());
        let u: Vec<f64> = (1..=12).map(|i| t.uniforms[12 - i]).collect();
        assert_eq!(f.value(&u), t.payoff);
        // splice against a cached base equals the generic splice
        let base = s.draw(12);
        let pre = s.draw(12);
        let mut l = CostLedger::new();
        let cache = f.prepare_base(&base, &mut l);
        for m_len in [0, 1, 5, 12] {
            let mut lm = CostLedger::new();
            let fast = f.value_spliced(&pre[..m_len], &base, &cache, &mut lm);
            assert_eq!(lm.step_applications, m_len as u64);
            let slow = f.value(&HybridPoint::new(pre.clone(), base.clone(), m_len).spliced());
            assert_eq!(fast, slow);
        }
    }
}
