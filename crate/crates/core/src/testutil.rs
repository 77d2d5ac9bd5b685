//! Shared fixtures for the crate's unit tests.

use crate::coeff::{Coefficient, InitialSegment};
use crate::jump::{JumpDistribution, LevySpec, NegTerm};
use crate::model::DelayedJumpModel;

/// Solve for the truncated-exponential rate whose mean magnitude at
/// truncation `r` equals `target`, by bisection (the map is monotone).
pub fn neg_rate_for_mean(target: f64, r: f64) -> f64 {
    let mean = |rate: f64| {
        let e = (-rate * r).exp();
        1.0 / rate - r * e / (1.0 - e)
    };
    let (mut lo, mut hi) = (1e-6, 1e6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Constant-coefficient admissible model with theta = 0.5 exactly:
/// f = 0.02, r = 0.01, g = 0.1, lambda = 1 and L = -0.2. Returns the model
/// together with the risk-free rate.
pub fn theta_half_model() -> (DelayedJumpModel, f64) {
    let rate = neg_rate_for_mean(0.2, 1.0);
    let dist = JumpDistribution::new(
        vec![],
        vec![NegTerm {
            weight: 1.0,
            rate,
            truncation: Some(1.0),
        }],
    )
    .unwrap();
    let model = DelayedJumpModel {
        drift: Coefficient::constant(0.02),
        jump_scale: Coefficient::constant(0.1),
        initial: InitialSegment::constant(1.0),
        delay: 0.25,
        levy: LevySpec::new(1.0, dist).unwrap(),
    };
    (model, 0.01)
}
