//! Simulation and European option pricing for stochastic delay equations
//! driven by compound-Poisson jumps with hyper-exponential marks.
//!
//! The crate provides:
//! - a positivity-preserving logarithmic Euler scheme for the delayed
//!   dynamics, with an exact-representation reference path ([`engine`]);
//! - the market-price-of-risk process and the change to the pricing
//!   measure, simulated exactly by intensity thinning ([`measure`]);
//! - Monte Carlo and Fourier-inversion call pricers plus Black-Scholes
//!   baselines ([`pricer`]);
//! - an empirical strong-convergence laboratory that couples scheme runs
//!   at several resolutions to a shared jump stream ([`convergence`]).

// Validations use `!(x > 0.0)` on purpose: NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeff;
pub mod convergence;
pub mod engine;
pub mod error;
pub mod jump;
pub mod measure;
pub mod model;
pub mod pricer;
pub mod quad;
pub mod rng;

#[cfg(test)]
pub(crate) mod testutil;

pub use coeff::{Coefficient, InitialSegment};
pub use error::{Error, Result};
pub use jump::{complex_jump_integral, JumpDistribution, LevySpec, NegTerm, PosTerm};
pub use model::{DelayedJumpModel, JumpStream, SimGrid, SimPath, ValidationReport};
pub use rng::CounterRng;

/// Fix the size of the global worker pool. Call once, before any parallel
/// work; ensembles produce identical results for every pool size.
pub fn build_thread_pool(threads: usize) -> std::result::Result<(), rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
}
