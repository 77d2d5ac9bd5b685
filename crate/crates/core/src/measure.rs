//! Change to the pricing measure.
//!
//! The market price of risk theta(t) shifts the jump intensity from
//! lambda to (1 - theta(t)) lambda; under the new measure the discounted
//! asset is a martingale. Simulation under the new measure is exact:
//! candidate arrivals come from a dominating Poisson process at rate
//! lambda (1 - theta_lo) and are thinned with the state-dependent
//! acceptance probability, so no intensity discretization enters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Check, DelayedJumpModel, JumpStream, SimGrid, SimPath};
use crate::rng::CounterRng;
use rayon::prelude::*;

/// Admissibility requires sup theta <= 1 - THETA_MARGIN.
pub const THETA_MARGIN: f64 = 1e-6;

/// Market data for a European call.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarketSpec {
    /// Risk-free rate per unit model time.
    pub rate: f64,
    /// Strike; zero is allowed and reduces the payoff to S(T).
    pub strike: f64,
    /// Maturity T.
    pub maturity: f64,
    /// Valuation time t in [0, T].
    pub valuation_time: f64,
}

impl MarketSpec {
    pub fn new(rate: f64, strike: f64, maturity: f64, valuation_time: f64) -> Result<Self> {
        if !rate.is_finite() || !(maturity > 0.0) || !(strike >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "market needs finite rate, K >= 0 and T > 0; got r = {rate}, K = {strike}, T = {maturity}"
            )));
        }
        if !(0.0..=maturity).contains(&valuation_time) {
            return Err(Error::InvalidInput(format!(
                "valuation time {valuation_time} outside [0, {maturity}]"
            )));
        }
        Ok(MarketSpec {
            rate,
            strike,
            maturity,
            valuation_time,
        })
    }
}

/// Which formula maps (f, g, lambda, L, r) to theta.
///
/// `Derived` is the form that makes the discounted asset driftless under
/// the shifted intensity and is the default everywhere. `Literal` keeps the
/// uncorrected textbook form for side-by-side comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaConvention {
    #[default]
    Derived,
    Literal,
}

/// theta from pointwise coefficient values.
pub fn theta_value(
    f_x: f64,
    g_x: f64,
    rate: f64,
    intensity: f64,
    mean_jump: f64,
    convention: ThetaConvention,
) -> Result<f64> {
    let driver = g_x * intensity * mean_jump;
    if driver == 0.0 {
        return Err(Error::DegenerateMarket(format!(
            "risk driver g * lambda * L vanishes (g = {g_x}, lambda = {intensity}, L = {mean_jump})"
        )));
    }
    Ok(match convention {
        ThetaConvention::Derived => 1.0 + (f_x - rate) / driver,
        ThetaConvention::Literal => (f_x + g_x - rate) / driver,
    })
}

/// Market-price-of-risk evaluator with its declared bounds.
#[derive(Debug, Clone)]
pub struct ThetaProcess {
    rate: f64,
    intensity: f64,
    mean_jump: f64,
    convention: ThetaConvention,
    /// Conservative bounds over the declared coefficient ranges.
    pub lo: f64,
    pub hi: f64,
}

impl ThetaProcess {
    pub fn new(model: &DelayedJumpModel, rate: f64, convention: ThetaConvention) -> Result<Self> {
        let mean_jump = model.levy.mean_jump();
        let intensity = model.levy.intensity;
        let (g_lo, g_hi) = model.jump_scale.bounds();
        if g_lo <= 0.0 && g_hi >= 0.0 {
            return Err(Error::DegenerateMarket(
                "jump scale range contains zero; theta is unbounded".into(),
            ));
        }
        if intensity * mean_jump == 0.0 {
            return Err(Error::DegenerateMarket(
                "lambda * L vanishes; no measure change is defined".into(),
            ));
        }
        let (f_lo, f_hi) = model.drift.bounds();
        // theta is monotone in the numerator and in 1/denominator, so the
        // extremes over the coefficient box sit at the corners.
        let numerators = match convention {
            ThetaConvention::Derived => [f_lo - rate, f_hi - rate],
            ThetaConvention::Literal => [f_lo + g_lo - rate, f_hi + g_hi - rate],
        };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &num in &numerators {
            for &g in &[g_lo, g_hi] {
                let v = match convention {
                    ThetaConvention::Derived => 1.0 + num / (g * intensity * mean_jump),
                    ThetaConvention::Literal => num / (g * intensity * mean_jump),
                };
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Ok(ThetaProcess {
            rate,
            intensity,
            mean_jump,
            convention,
            lo,
            hi,
        })
    }

    /// theta at a delayed state value.
    pub fn eval(&self, model: &DelayedJumpModel, delayed_value: f64) -> Result<f64> {
        theta_value(
            model.f(delayed_value),
            model.g(delayed_value),
            self.rate,
            self.intensity,
            self.mean_jump,
            self.convention,
        )
    }

    /// Intensity of the dominating Poisson process used for thinning.
    pub fn majorant_intensity(&self) -> f64 {
        self.intensity * (1.0 - self.lo)
    }
}

/// Outcome of the admissibility checks, with per-check witnesses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub checks: Vec<Check>,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub warnings: Vec<String>,
}

impl AdmissibilityReport {
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

fn check(name: &str, passed: bool, witness: f64, detail: &str) -> Check {
    Check {
        name: name.into(),
        passed,
        witness,
        detail: detail.into(),
    }
}

/// Verify that the measure change is well defined: the model itself is
/// valid, theta stays below one, and the Novikov-type integrand is finite.
/// Negative theta only raises the intensity and is reported as a warning.
pub fn check_admissibility(
    model: &DelayedJumpModel,
    rate: f64,
    convention: ThetaConvention,
) -> AdmissibilityReport {
    let mut checks = Vec::new();
    let mut warnings = Vec::new();

    let model_report = model.validate();
    checks.push(check(
        "model_valid",
        model_report.passed(),
        if model_report.passed() { 1.0 } else { 0.0 },
        "underlying model assumptions hold",
    ));

    match ThetaProcess::new(model, rate, convention) {
        Err(e) => {
            checks.push(check("risk_driver_nonzero", false, 0.0, &e.to_string()));
            AdmissibilityReport {
                checks,
                theta_lo: f64::NAN,
                theta_hi: f64::NAN,
                warnings,
            }
        }
        Ok(theta) => {
            checks.push(check(
                "risk_driver_nonzero",
                true,
                theta.intensity * theta.mean_jump,
                "g, lambda and L are all bounded away from zero",
            ));
            checks.push(check(
                "theta_below_one",
                theta.hi <= 1.0 - THETA_MARGIN,
                theta.hi,
                "sup theta must stay below 1 so the density stays positive",
            ));
            if theta.lo < 0.0 {
                warnings.push(format!(
                    "theta can reach {:.6}: the pricing measure raises the jump intensity",
                    theta.lo
                ));
            }
            // (1 - theta) ln(1 - theta) + theta is convex with minimum 0 at
            // theta = 0; its maximum over the range sits at an endpoint.
            let novikov = |th: f64| (1.0 - th) * (1.0 - th).ln() + th;
            let novikov_rate = if theta.hi < 1.0 {
                theta.intensity * novikov(theta.lo).max(novikov(theta.hi))
            } else {
                f64::INFINITY
            };
            checks.push(check(
                "novikov_integrand_finite",
                novikov_rate.is_finite(),
                novikov_rate,
                "per-unit-time bound on the exponential-moment integrand",
            ));
            AdmissibilityReport {
                checks,
                theta_lo: theta.lo,
                theta_hi: theta.hi,
                warnings,
            }
        }
    }
}

/// Observed asset values on [t - b, t] at the working grid resolution,
/// used to seed delayed lookups of a conditional simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryPath {
    start: f64,
    dt: f64,
    values: Vec<f64>,
}

impl HistoryPath {
    pub fn new(start: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || values.is_empty() {
            return Err(Error::History("history needs dt > 0 and values".into()));
        }
        if values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::History("history values must be positive".into()));
        }
        Ok(HistoryPath { start, dt, values })
    }

    /// History over [-b, 0] sampled from the initial segment.
    pub fn from_initial(model: &DelayedJumpModel, grid: &SimGrid) -> Result<Self> {
        let m = grid.delay_steps(model.delay)?;
        let dt = grid.dt();
        let values = (0..=m)
            .map(|j| model.phi((j as f64 - m as f64) * dt))
            .collect();
        HistoryPath::new(-model.delay, dt, values)
    }

    /// Sample a simulated path on [t - b, t]; grid times only.
    pub fn from_path(path: &SimPath, model: &DelayedJumpModel, t: f64) -> Result<Self> {
        let dt = path.grid.dt();
        let m = path.grid.delay_steps(model.delay)?;
        let end = (t / dt).round() as i64;
        if ((t / dt) - end as f64).abs() > 1e-9 {
            return Err(Error::History(format!(
                "history end {t} is not aligned to the grid step {dt}"
            )));
        }
        let values = ((end - m as i64)..=end)
            .map(|j| {
                if j <= 0 {
                    model.phi(j as f64 * dt)
                } else {
                    path.values[j as usize]
                }
            })
            .collect();
        HistoryPath::new(t - model.delay, dt, values)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn end(&self) -> f64 {
        self.start + (self.values.len() - 1) as f64 * self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Last stored value, S(t).
    pub fn spot(&self) -> f64 {
        *self.values.last().expect("validated non-empty")
    }

    /// Check the window [t - b, t] is covered at resolution `dt`.
    pub fn covers(&self, t: f64, delay: f64, dt: f64) -> Result<()> {
        let tol = 1e-9 * dt.max(1.0);
        if (self.dt - dt).abs() > tol {
            return Err(Error::History(format!(
                "history resolution {} does not match the grid step {dt}",
                self.dt
            )));
        }
        if (self.end() - t).abs() > tol || self.start > t - delay + tol {
            return Err(Error::History(format!(
                "history [{}, {}] does not cover [{}, {t}]",
                self.start,
                self.end(),
                t - delay
            )));
        }
        Ok(())
    }

    /// Value at offset j from the end: j = 0 is S(t), j = 1 is S(t - dt)...
    fn value_from_end(&self, j: usize) -> f64 {
        self.values[self.values.len() - 1 - j]
    }
}

/// Simulate the asset on [t, T] under the pricing measure, starting from
/// the supplied history; returns the full value sequence at the segment
/// grid times t, t + dt, ..., T together with the accepted jumps.
#[allow(clippy::too_many_arguments)]
fn q_segment(
    model: &DelayedJumpModel,
    rate: f64,
    theta: &ThetaProcess,
    history: &HistoryPath,
    t: f64,
    maturity: f64,
    dt: f64,
    rng: &mut CounterRng,
) -> Result<(Vec<f64>, JumpStream, Vec<f64>)> {
    let steps = ((maturity - t) / dt).round() as usize;
    let m = (model.delay / dt).round() as usize;
    let mean_jump = model.levy.mean_jump();
    let lambda = model.levy.intensity;
    let majorant = theta.majorant_intensity();

    // Discounted state; multiply back by e^{r u} on output.
    let mut disc = Vec::with_capacity(steps + 1);
    disc.push(history.spot() * (-rate * t).exp());
    let mut jump_times = Vec::new();
    let mut jump_marks = Vec::new();
    let mut jump_values = Vec::new();

    let mut next_candidate = t + rng.exponential(majorant);
    for k in 0..steps {
        let t_k = t + k as f64 * dt;
        let t_next = t + (k + 1) as f64 * dt;
        // Delayed state: history for lookups at or before t, else simulated.
        let x = if k < m {
            history.value_from_end(m - k)
        } else {
            disc[k - m] * (rate * (t_k - model.delay)).exp()
        };
        let g_k = model.g(x);
        let th_k = theta.eval(model, x)?;
        let accept_p = (1.0 - th_k) * lambda / majorant;
        if accept_p > 1.0 + 1e-12 {
            return Err(Error::DegenerateMarket(format!(
                "thinning majorant violated: theta {th_k} below declared bound {}",
                theta.lo
            )));
        }

        let mut factor_product = 1.0;
        while next_candidate <= t_next {
            let tau = next_candidate;
            next_candidate += rng.exponential(majorant);
            if rng.uniform() <= accept_p {
                let mark = model.levy.dist.sample(rng);
                let factor = 1.0 + g_k * mark;
                if factor <= 0.0 {
                    return Err(Error::Positivity {
                        time: tau,
                        factor,
                        path: None,
                    });
                }
                factor_product *= factor;
                jump_times.push(tau);
                jump_marks.push(mark);
                jump_values.push(disc[k] * factor_product * (rate * tau).exp());
            }
        }

        // Compensator drift: minus g lambda (1 - theta) L per unit time,
        // which makes the discounted state a martingale step by step.
        let drift = -g_k * lambda * (1.0 - th_k) * mean_jump * dt;
        let next = disc[k] * drift.exp() * factor_product;
        if !(next > 0.0) || !next.is_finite() {
            return Err(Error::Positivity {
                time: t_next,
                factor: next,
                path: None,
            });
        }
        disc.push(next);
    }

    let values = disc
        .iter()
        .enumerate()
        .map(|(k, s)| s * (rate * (t + k as f64 * dt)).exp())
        .collect();
    Ok((
        values,
        JumpStream {
            times: jump_times,
            marks: jump_marks,
        },
        jump_values,
    ))
}

/// Simulate one path of the asset under the pricing measure on [0, T].
///
/// With a vanishing jump scale the asset is riskless and the path is the
/// deterministic phi(0) e^{r t}.
pub fn simulate_q_path(
    model: &DelayedJumpModel,
    market: &MarketSpec,
    grid: &SimGrid,
    seed: u64,
    convention: ThetaConvention,
) -> Result<SimPath> {
    let mut rng = CounterRng::new(seed, 0);
    simulate_q_path_with_rng(model, market, grid, &mut rng, convention)
}

fn simulate_q_path_with_rng(
    model: &DelayedJumpModel,
    market: &MarketSpec,
    grid: &SimGrid,
    rng: &mut CounterRng,
    convention: ThetaConvention,
) -> Result<SimPath> {
    grid.delay_steps(model.delay)?;
    if (grid.horizon() - market.maturity).abs() > 1e-12 * market.maturity {
        return Err(Error::InvalidInput(
            "grid horizon must equal the maturity for a full path".into(),
        ));
    }
    if model.jump_scale.is_zero() {
        let phi0 = model.initial.at_zero();
        let values = (0..=grid.steps())
            .map(|k| phi0 * (market.rate * grid.time(k)).exp())
            .collect();
        return Ok(SimPath {
            grid: *grid,
            values,
            jumps: JumpStream::empty(),
            jump_values: Vec::new(),
        });
    }
    let theta = ThetaProcess::new(model, market.rate, convention)?;
    let history = HistoryPath::from_initial(model, grid)?;
    let (values, jumps, jump_values) = q_segment(
        model,
        market.rate,
        &theta,
        &history,
        0.0,
        market.maturity,
        grid.dt(),
        rng,
    )?;
    Ok(SimPath {
        grid: *grid,
        values,
        jumps,
        jump_values,
    })
}

/// Deterministic parallel ensemble under the pricing measure.
pub fn simulate_q_ensemble(
    model: &DelayedJumpModel,
    market: &MarketSpec,
    grid: &SimGrid,
    n_paths: usize,
    seed: u64,
    convention: ThetaConvention,
) -> Result<Vec<SimPath>> {
    if n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be at least 1".into()));
    }
    model.require_valid()?;
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::new(seed, i as u64);
            simulate_q_path_with_rng(model, market, grid, &mut rng, convention)
                .map_err(|e| e.with_path(i))
        })
        .collect()
}

/// Terminal asset value of a conditional simulation on [t, T] seeded with
/// an observed history (used by the conditional Monte Carlo pricer).
pub fn q_terminal_from_history(
    model: &DelayedJumpModel,
    market: &MarketSpec,
    theta: &ThetaProcess,
    history: &HistoryPath,
    dt: f64,
    rng: &mut CounterRng,
) -> Result<f64> {
    let t = market.valuation_time;
    let (values, _, _) = q_segment(
        model,
        market.rate,
        theta,
        history,
        t,
        market.maturity,
        dt,
        rng,
    )?;
    Ok(*values.last().expect("segment holds at least one value"))
}

/// Girsanov density S^theta(T) along a path simulated under the original
/// measure: exp( sum_jumps ln(1 - theta(tau)) + lambda int_0^T theta ds ),
/// with the compensator integral evaluated on the same step partition as
/// the scheme drift.
pub fn radon_nikodym(
    model: &DelayedJumpModel,
    rate: f64,
    path: &SimPath,
    convention: ThetaConvention,
) -> Result<f64> {
    let grid = &path.grid;
    let m = grid.delay_steps(model.delay)?;
    let dt = grid.dt();
    let theta = ThetaProcess::new(model, rate, convention)?;

    let delayed = |k: usize| -> f64 {
        if k >= m {
            path.values[k - m]
        } else {
            model.phi((k as f64 - m as f64) * dt)
        }
    };

    let mut log_density = 0.0;
    for (tau, _) in path.jumps.times.iter().zip(path.jumps.marks.iter()) {
        // Interval (t_k, t_{k+1}] owns the jump, matching the scheme.
        let k = ((tau / dt).ceil() as usize)
            .saturating_sub(1)
            .min(grid.steps() - 1);
        let th = theta.eval(model, delayed(k))?;
        if 1.0 - th <= 0.0 {
            return Err(Error::Domain(format!(
                "1 - theta = {} at jump time {tau}",
                1.0 - th
            )));
        }
        log_density += (1.0 - th).ln();
    }
    for k in 0..grid.steps() {
        let th = theta.eval(model, delayed(k))?;
        log_density += th * model.levy.intensity * dt;
    }
    Ok(log_density.exp())
}
