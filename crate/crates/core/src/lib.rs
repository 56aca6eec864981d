//! Truncation-dimension-aware multilevel Monte Carlo.
//!
//! Estimators of `∫_{[0,1]^d} f` whose cost adapts to how much of the
//! variance of `f` sits in its leading coordinates, the same machinery for
//! time-varying Markov chain functionals, and the oracles used to check
//! their variance and cost bounds.

// NaN must fail validation, so `!(x > 0.0)` is intended throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anova;
pub mod bench;
pub mod config;
pub mod error;
pub mod integrand;
pub mod markov;
pub mod mlmc;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use rng::{CostLedger, UniformStream};
