//! Counter-based, splittable uniform streams and the cost ledger.
//!
//! A stream is identified by `(seed, path)`. Its key is a hash of the seed
//! and every fork label on the path, and the k-th draw is a pure function of
//! `(key, k)`. Forking never touches the parent's counter, so the identity of
//! every substream is independent of execution order.

use std::ops::{Add, AddAssign, Sub};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const SEED_SALT: u64 = 0x6a09_e667_f3bc_c909;
const LABEL_SALT: u64 = 0xbb67_ae85_84ca_a73b;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic source of uniform variates on `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniformStream {
    seed: u64,
    path: Vec<u64>,
    key: u64,
    counter: u64,
}

impl UniformStream {
    /// Root stream for `seed`, empty path, zero draws.
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            path: Vec::new(),
            key: mix64(seed ^ SEED_SALT),
            counter: 0,
        }
    }

    /// Child stream labelled `label`. The parent is left untouched.
    pub fn fork(&self, label: u64) -> Self {
        let mut path = self.path.clone();
        path.push(label);
        let key = mix64(self.key ^ mix64(label.wrapping_add(LABEL_SALT)).rotate_left(17));
        Self {
            seed: self.seed,
            path,
            key: mix64(key.wrapping_add(GOLDEN)),
            counter: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Number of uniforms drawn since creation.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// One variate in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Overwrites `out` with fresh variates.
    pub fn fill(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.next_f64();
        }
    }

    pub fn draw(&mut self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        self.fill(&mut v);
        v
    }
}

/// Abstract work counters; every unit weighs one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub coordinate_draws: u64,
    pub step_applications: u64,
    pub payoff_evals: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.coordinate_draws + self.step_applications + self.payoff_evals
    }

    #[inline]
    pub fn charge_draws(&mut self, n: usize) {
        self.coordinate_draws += n as u64;
    }

    #[inline]
    pub fn charge_steps(&mut self, n: usize) {
        self.step_applications += n as u64;
    }

    #[inline]
    pub fn charge_payoff(&mut self) {
        self.payoff_evals += 1;
    }

    /// Fills `out` from `stream` and books the draws.
    #[inline]
    pub fn draw_into(&mut self, stream: &mut UniformStream, out: &mut [f64]) {
        stream.fill(out);
        self.charge_draws(out.len());
    }
}

impl Add for CostLedger {
    type Output = CostLedger;
    fn add(self, rhs: CostLedger) -> CostLedger {
        CostLedger {
            coordinate_draws: self.coordinate_draws + rhs.coordinate_draws,
            step_applications: self.step_applications + rhs.step_applications,
            payoff_evals: self.payoff_evals + rhs.payoff_evals,
        }
    }
}

impl AddAssign for CostLedger {
    fn add_assign(&mut self, rhs: CostLedger) {
        *self = *self + rhs;
    }
}

impl Sub for CostLedger {
    type Output = CostLedger;
    fn sub(self, rhs: CostLedger) -> CostLedger {
        CostLedger {
            coordinate_draws: self.coordinate_draws - rhs.coordinate_draws,
            step_applications: self.step_applications - rhs.step_applications,
            payoff_evals: self.payoff_evals - rhs.payoff_evals,
        }
    }
}
