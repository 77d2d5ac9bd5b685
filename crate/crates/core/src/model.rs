//! Delayed jump model, simulation grid, jump streams and paths, and the
//! assumption validator.

use serde::{Deserialize, Serialize};

use crate::coeff::{Coefficient, InitialSegment};
use crate::error::{Error, Result};
use crate::jump::{sample_poisson_times, LevySpec};
use crate::rng::CounterRng;

/// Margin below which the sampled positivity check 1 + z g(x) fails.
pub const POSITIVITY_MARGIN_MIN: f64 = 1e-9;

/// Tail mass used to pick the effective top of the mark support when
/// checking the positivity margin.
const MARGIN_TAIL_EPS: f64 = 1e-15;

/// Asset dynamics: dS = f(S(t-b)) S dt + g(S(t-b)) S dZ with initial
/// segment phi on [-b, 0] and compound-Poisson driver Z.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelayedJumpModel {
    /// Drift coefficient f.
    pub drift: Coefficient,
    /// Jump scale coefficient g.
    pub jump_scale: Coefficient,
    /// Initial segment phi on [-delay, 0].
    pub initial: InitialSegment,
    /// Delay b > 0 in model-time units.
    pub delay: f64,
    /// Jump intensity and mark law.
    pub levy: LevySpec,
}

impl DelayedJumpModel {
    #[inline]
    pub fn f(&self, x: f64) -> f64 {
        self.drift.eval(x)
    }

    #[inline]
    pub fn g(&self, x: f64) -> f64 {
        self.jump_scale.eval(x)
    }

    #[inline]
    pub fn phi(&self, t: f64) -> f64 {
        self.initial.eval(t)
    }

    /// Run every model-level check and collect the evidence.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();

        let phi0 = self.initial.at_zero();
        checks.push(Check::new(
            "initial_positive",
            phi0 > 0.0,
            phi0,
            "phi(0) must be strictly positive",
        ));

        checks.push(Check::new(
            "delay_positive",
            self.delay > 0.0 && self.delay.is_finite(),
            self.delay,
            "delay b must be strictly positive",
        ));

        let well_formed =
            self.drift.well_formed() && self.jump_scale.well_formed() && self.initial.well_formed();
        checks.push(Check::new(
            "coefficients_well_formed",
            well_formed,
            if well_formed { 1.0 } else { 0.0 },
            "catalog parameters finite and consistent",
        ));

        // Spot-check declared bounds and Lipschitz constants on a dense grid.
        if well_formed {
            let span = 100.0_f64.max(10.0 * phi0.abs());
            checks.push(grid_check("drift", &self.drift, span));
            checks.push(grid_check("jump_scale", &self.jump_scale, span));
            checks.push(holder_check(&self.initial, self.delay));
        }

        let bounded = !self.levy.dist.unbounded_below();
        checks.push(Check::new(
            "bounded_negative_jumps",
            bounded,
            if bounded { 1.0 } else { 0.0 },
            "unbounded negative jumps break the positivity guarantee",
        ));

        // Positivity margin: inf of 1 + z g(x) over the declared g-range and
        // the effective mark support. Bilinear in (z, g), so corners suffice.
        if bounded && well_formed {
            let (g_lo, g_hi) = self.jump_scale.bounds();
            let z_lo = self.levy.dist.lower_bound().unwrap_or(0.0);
            let z_hi = self.levy.dist.effective_upper_bound(MARGIN_TAIL_EPS);
            let margin = [z_lo, z_hi]
                .iter()
                .flat_map(|&z| [1.0 + z * g_lo, 1.0 + z * g_hi])
                .fold(f64::INFINITY, f64::min);
            checks.push(Check::new(
                "positivity_margin",
                margin >= POSITIVITY_MARGIN_MIN,
                margin,
                "inf of 1 + z g(x) over mark support and coefficient range",
            ));
        }

        ValidationReport { checks }
    }

    /// Validate and convert a failed report into an error.
    pub fn require_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.passed() {
            Ok(())
        } else {
            Err(Error::Validation(report.failures().join("; ")))
        }
    }
}

fn grid_check(name: &str, coeff: &Coefficient, span: f64) -> Check {
    let (lo, hi) = coeff.bounds();
    let lip = coeff.lipschitz();
    let n = 10_000;
    let mut worst_bound = 0.0_f64;
    let mut worst_lip = 0.0_f64;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=n {
        let x = -span + 2.0 * span * k as f64 / n as f64;
        let v = coeff.eval(x);
        worst_bound = worst_bound.max(lo - v).max(v - hi);
        if let Some((px, pv)) = prev {
            let slope = ((v - pv) / (x - px)).abs();
            worst_lip = worst_lip.max(slope - lip);
        }
        prev = Some((x, v));
    }
    let ok = worst_bound <= 1e-9 && worst_lip <= 1e-6;
    Check::new(
        match name {
            "drift" => "drift_declarations",
            _ => "jump_scale_declarations",
        },
        ok,
        worst_bound.max(worst_lip),
        "declared bounds and Lipschitz constant hold on a 10^4-point grid",
    )
}

fn holder_check(initial: &InitialSegment, delay: f64) -> Check {
    let (gamma, constant) = initial.holder(delay);
    let n = 2_000;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..n {
        let s = -delay + delay * k as f64 / n as f64;
        let t = s + delay / n as f64;
        let lhs = (initial.eval(t) - initial.eval(s)).abs();
        worst = worst.max(lhs - constant * (t - s).abs().powf(gamma));
    }
    Check::new(
        "initial_holder",
        worst <= 1e-9,
        worst,
        "declared Hoelder modulus holds on the initial segment",
    )
}

/// One validator check with its witness quantity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub witness: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, witness: f64, detail: &str) -> Self {
        Check {
            name: name.into(),
            passed,
            witness,
            detail: detail.into(),
        }
    }
}

/// Outcome of `DelayedJumpModel::validate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} (witness {:.6e}): {}", c.name, c.witness, c.detail))
            .collect()
    }
}

/// Uniform grid on [0, T] whose step divides the delay.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimGrid {
    horizon: f64,
    steps: usize,
}

impl SimGrid {
    /// Grid with n steps on [0, T]; the delay-alignment requirement is
    /// checked against the model at simulation time.
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidInput("grid needs at least one step".into()));
        }
        Ok(SimGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }

    /// Number of grid steps per delay, requiring b to be an integer
    /// multiple of the step within 1e-12 relative.
    pub fn delay_steps(&self, delay: f64) -> Result<usize> {
        let ratio = delay / self.dt();
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > 1e-12 * ratio.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "delay {delay} is not an integer multiple of the step {}",
                self.dt()
            )));
        }
        Ok(rounded as usize)
    }
}

/// Ordered jump times on (0, T] with their marks: the shared randomness
/// that couples scheme runs at different resolutions.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct JumpStream {
    pub times: Vec<f64>,
    pub marks: Vec<f64>,
}

impl JumpStream {
    pub fn empty() -> Self {
        JumpStream::default()
    }

    /// Draw arrivals and marks on (0, horizon] from one stream.
    pub fn sample(levy: &LevySpec, horizon: f64, rng: &mut CounterRng) -> Self {
        let times = sample_poisson_times(levy.intensity, 0.0, horizon, rng);
        let marks = times.iter().map(|_| levy.dist.sample(rng)).collect();
        JumpStream { times, marks }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if self.times.len() != self.marks.len() {
            return Err(Error::InvalidInput(
                "jump times and marks differ in length".into(),
            ));
        }
        for w in self.times.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidInput(
                    "jump times must strictly increase".into(),
                ));
            }
        }
        if let (Some(first), Some(last)) = (self.times.first(), self.times.last()) {
            if *first <= 0.0 || *last > horizon {
                return Err(Error::InvalidInput(format!(
                    "jump times must lie in (0, {horizon}]"
                )));
            }
        }
        Ok(())
    }

    /// Check every mark against the support of the mark law. Streams drawn
    /// through [`JumpStream::sample`] satisfy this by construction; the
    /// check is for externally supplied streams.
    pub fn validate_marks(&self, dist: &crate::jump::JumpDistribution) -> Result<()> {
        let lo = dist.lower_bound().unwrap_or(f64::NEG_INFINITY);
        for &m in &self.marks {
            if !m.is_finite() || m < lo {
                return Err(Error::InvalidInput(format!(
                    "mark {m} outside the support [{lo}, inf)"
                )));
            }
        }
        Ok(())
    }
}

/// A simulated path: values on the grid, plus the jump stream that drove it
/// and the state right after each jump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimPath {
    pub grid: SimGrid,
    /// S at t_0..t_n (n+1 values).
    pub values: Vec<f64>,
    pub jumps: JumpStream,
    /// S at each jump time, aligned with `jumps.times`.
    pub jump_values: Vec<f64>,
}

impl SimPath {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("paths hold at least S(0)")
    }

    pub fn min_value(&self) -> f64 {
        self.values
            .iter()
            .chain(self.jump_values.iter())
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }
}
