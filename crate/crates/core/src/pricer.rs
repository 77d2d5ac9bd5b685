//! European call valuation.
//!
//! Three routes are provided: Monte Carlo under the pricing measure
//! (optionally conditioned on an observed history), Fourier inversion in
//! the last delay period where the conditional law of the terminal value
//! is explicit, and Black-Scholes baselines for benchmark tables.
//!
//! Inside the last delay period the discounted terminal value factors as
//! `S~(T) = S~(t) * A * e^Y` with `A` deterministic given the history and
//! `Y` a compensated jump integral whose characteristic function is
//! explicit. Tail probabilities are recovered by half-line Fourier
//! inversion. `Y` carries an atom at the pure-compensator point (the
//! no-jump event), so the atom is priced analytically and only the
//! continuous remainder goes through the oscillatory integral; this keeps
//! the integrand absolutely integrable.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jump::complex_jump_integral;
use crate::measure::{
    check_admissibility, q_terminal_from_history, theta_value, HistoryPath, MarketSpec,
    ThetaConvention, ThetaProcess,
};
use crate::model::{DelayedJumpModel, SimGrid};
use crate::rng::CounterRng;

/// Trigger for the riskless closed-form branch: integral of g^2 over the
/// pricing window below this threshold.
const G_SQUARED_EPS: f64 = 1e-14;

/// Jump scales below this are treated as inactive when locating the atom
/// of the log-jump integral.
const G_ACTIVE_EPS: f64 = 1e-14;

/// Lower endpoint of the half-line Fourier integral; the removable
/// singularity at zero is covered by one rectangle of this width.
const XI_MIN: f64 = 1e-8;

/// Hard cap on the upper endpoint of the Fourier integral.
const XI_CAP: f64 = 1e4;

/// Priced value with its sampling error and provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PricingResult {
    pub price: f64,
    /// Zero for deterministic methods.
    pub stderr: f64,
    pub method: String,
    pub n_paths: Option<u64>,
    pub seed: Option<u64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl PricingResult {
    fn deterministic(price: f64, method: &str) -> Self {
        PricingResult {
            price,
            stderr: 0.0,
            method: method.into(),
            n_paths: None,
            seed: None,
            diagnostics: BTreeMap::new(),
        }
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Terminal asset values of a conditional simulation under the pricing
/// measure: path i draws from the stream keyed by (seed, i).
pub fn mc_terminals(
    model: &DelayedJumpModel,
    market: &MarketSpec,
    history: &HistoryPath,
    grid: &SimGrid,
    n_paths: usize,
    seed: u64,
    convention: ThetaConvention,
) -> Result<Vec<f64>> {
    if n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be at least 1".into()));
    }
    let t = market.valuation_time;
    let dt = grid.dt();
    history.covers(t, model.delay, dt)?;
    let remaining = market.maturity - t;
    let steps = (remaining / dt).round();
    if (remaining / dt - steps).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "valuation time {t} is not aligned to the grid step {dt}"
        )));
    }
    if steps == 0.0 {
        return Ok(vec![history.spot(); n_paths]);
    }
    if model.jump_scale.is_zero() {
        let terminal = history.spot() * (market.rate * remaining).exp();
        return Ok(vec![terminal; n_paths]);
    }
    model.require_valid()?;
    let report = check_admissibility(model, market.rate, convention);
    if !report.passed() {
        return Err(Error::Validation(format!(
            "measure change not admissible: {}",
            report.failures().join("; ")
        )));
    }
    let theta = ThetaProcess::new(model, market.rate, convention)?;
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::new(seed, i as u64);
            q_terminal_from_history(model, market, &theta, history, dt, &mut rng)
                .map_err(|e| e.with_path(i))
        })
        .collect()
}

/// Monte Carlo price at inception (valuation time zero), with delayed
/// lookups seeded from the initial segment.
pub fn price_mc(
    model: &DelayedJumpModel,
    market: &MarketSpec,
    grid: &SimGrid,
    n_paths: usize,
    seed: u64,
    convention: ThetaConvention,
) -> Result<PricingResult> {
    if market.valuation_time != 0.0 {
        return Err(Error::InvalidInput(
            "price_mc values at inception; use price_mc_conditional for t > 0".into(),
        ));
    }
    let history = HistoryPath::from_initial(model, grid)?;
    price_mc_conditional(model, market, &history, grid, n_paths, seed, convention)
}

/// Monte Carlo price conditioned on an observed history on [t - b, t].
pub fn price_mc_conditional(
    model: &DelayedJumpModel,
    market: &MarketSpec,
    history: &HistoryPath,
    grid: &SimGrid,
    n_paths: usize,
    seed: u64,
    convention: ThetaConvention,
) -> Result<PricingResult> {
    let t = market.valuation_time;
    let tau = market.maturity - t;
    if tau == 0.0 {
        let payoff = (history.spot() - market.strike).max(0.0);
        return Ok(PricingResult::deterministic(payoff, "mc"));
    }
    if model.jump_scale.is_zero() {
        let price = (history.spot() - market.strike * (-market.rate * tau).exp()).max(0.0);
        return Ok(PricingResult::deterministic(price, "mc"));
    }
    let terminals = mc_terminals(model, market, history, grid, n_paths, seed, convention)?;
    let disc = (-market.rate * tau).exp();
    let payoffs: Vec<f64> = terminals
        .iter()
        .map(|s| disc * (s - market.strike).max(0.0))
        .collect();
    let (mean, se) = mean_and_stderr(&payoffs);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("discount".into(), disc);
    Ok(PricingResult {
        price: mean,
        stderr: se,
        method: "mc".into(),
        n_paths: Some(n_paths as u64),
        seed: Some(seed),
        diagnostics,
    })
}

/// Precomputed conditional structure of the terminal value on [t, T]:
/// time-integrated jump activity per distinct jump-scale value, the
/// compensator shift, and the deterministic discount factor A.
#[derive(Debug, Clone)]
pub struct FourierContext {
    /// (g value, integral of lambda_Q over the sub-window where g applies).
    groups: Vec<(f64, f64)>,
    dist: crate::jump::JumpDistribution,
    /// exp of minus the integrated active intensity: mass of the no-jump atom.
    atom: f64,
    /// Compensator shift D: the value Y takes on the no-jump event.
    drift_shift: f64,
    /// The deterministic factor A.
    a_factor: f64,
    /// Integral of g^2 over the window (deterministic-branch trigger).
    g_squared: f64,
    disc_spot: f64,
}

impl FourierContext {
    /// Build from an observed history; requires T - b <= t <= T so that
    /// every delayed argument on [t, T] is already observed.
    pub fn new(
        model: &DelayedJumpModel,
        market: &MarketSpec,
        history: &HistoryPath,
        convention: ThetaConvention,
    ) -> Result<Self> {
        let t = market.valuation_time;
        let maturity = market.maturity;
        if t < maturity - model.delay - 1e-12 || t > maturity {
            return Err(Error::Range {
                t,
                lo: maturity - model.delay,
                hi: maturity,
            });
        }
        let dt = history.dt();
        history.covers(t, model.delay, dt)?;
        let steps = ((maturity - t) / dt).round() as usize;
        if (((maturity - t) / dt) - steps as f64).abs() > 1e-9 {
            return Err(Error::History(format!(
                "window [{t}, {maturity}] is not a whole number of history steps"
            )));
        }
        let lambda = model.levy.intensity;
        let mean_jump = model.levy.mean_jump();
        let m = (model.delay / dt).round() as usize;

        // Trapezoid in time; nodes grouped by the (bit-exact) value of g so
        // the per-xi mark integrals are evaluated once per distinct value.
        // Nodes with a vanishing jump scale contribute nothing to the law of
        // Y and never need theta.
        let mut weighted: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        let mut g_squared = 0.0;
        for j in 0..=steps {
            let w = if j == 0 || j == steps { 0.5 * dt } else { dt };
            // Delayed state at u_j = t + j dt comes from the history window.
            let x = history.values()[history.values().len() - 1 - (m - j)];
            let g = model.g(x);
            g_squared += w * g * g;
            if g.abs() <= G_ACTIVE_EPS {
                continue;
            }
            let th = theta_value(model.f(x), g, market.rate, lambda, mean_jump, convention)?;
            let lam_q = (1.0 - th) * lambda;
            let entry = weighted.entry(g.to_bits()).or_insert((g, 0.0));
            entry.1 += w * lam_q;
        }
        let groups: Vec<(f64, f64)> = weighted.into_values().collect();

        let mut lambda_total = 0.0;
        let mut drift_shift = 0.0;
        let mut log_a = 0.0;
        for &(g, wl) in &groups {
            if g.abs() <= G_ACTIVE_EPS {
                continue;
            }
            lambda_total += wl;
            // E[ln(1 + g Y)] = g L - integral of (z g - ln(1 + z g)) f_Y.
            let c1 = complex_jump_integral(&model.levy.dist, g, Complex64::new(1.0, 0.0))?;
            let mean_log = g * model.levy.mean_jump() - c1.re;
            drift_shift -= wl * mean_log;
            log_a -= wl * c1.re;
        }

        Ok(FourierContext {
            groups,
            dist: model.levy.dist.clone(),
            atom: (-lambda_total).exp(),
            drift_shift,
            a_factor: log_a.exp(),
            g_squared,
            disc_spot: history.spot() * (-market.rate * t).exp(),
        })
    }

    /// The deterministic compensator factor A in S~(T) = S~(t) A e^Y;
    /// always in (0, 1] since ln(1 + x) <= x.
    pub fn a_factor(&self) -> f64 {
        self.a_factor
    }

    /// Mass of the no-jump atom of Y.
    pub fn atom_mass(&self) -> f64 {
        self.atom
    }

    /// Location of the atom: the compensator shift D.
    pub fn drift_shift(&self) -> f64 {
        self.drift_shift
    }

    /// log E[e^{c Y}] for the compensated log-jump integral Y.
    pub fn char_exponent(&self, c: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(g, wl) in &self.groups {
            if g.abs() <= G_ACTIVE_EPS {
                continue;
            }
            acc += wl * complex_jump_integral(&self.dist, g, c)?;
        }
        Ok(acc)
    }

    /// Whether any jump can push Y above its no-jump value D.
    fn can_rise(&self) -> bool {
        self.groups.iter().any(|&(g, _)| {
            g > G_ACTIVE_EPS && !self.dist.pos_terms().is_empty()
                || g < -G_ACTIVE_EPS && !self.dist.neg_terms().is_empty()
        })
    }

    /// Whether any jump can push Y below its no-jump value D.
    fn can_fall(&self) -> bool {
        self.groups.iter().any(|&(g, _)| {
            g > G_ACTIVE_EPS && !self.dist.neg_terms().is_empty()
                || g < -G_ACTIVE_EPS && !self.dist.pos_terms().is_empty()
        })
    }
}

/// Options for the Fourier pricer.
#[derive(Debug, Clone, Copy, Default)]
pub struct FourierOptions {
    pub convention: ThetaConvention,
    pub w_convention: WConvention,
}

/// Which moneyness threshold enters the tail probabilities.
///
/// `Derived` solves S~(T) >= K e^{-rT} for Y, including the ln(S~(t) A)
/// term; `Literal` keeps the uncorrected form for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WConvention {
    #[default]
    Derived,
    Literal,
}

/// The deterministic exponential compensator factor A(t) for the window
/// [t, T], computed from the observed history.
pub fn a_factor(
    model: &DelayedJumpModel,
    market: &MarketSpec,
    history: &HistoryPath,
    convention: ThetaConvention,
) -> Result<f64> {
    Ok(FourierContext::new(model, market, history, convention)?.a_factor())
}

/// Chernoff gate for the tail m([w, infinity)) of the exponentially
/// shifted measure m(dy) = e^{c0 y} A^{c0} Q_Y(dy) (c0 = 0 is the plain
/// law, c0 = 1 the tilted one; both have total mass `mass` = 1). When a
/// bound certifies the tail is 0 or `mass` to within 1e-13 the oscillatory
/// integral is skipped entirely.
fn chernoff_tail(ctx: &FourierContext, c0: f64, mass: f64, w: f64) -> Result<Option<f64>> {
    let log_a = ctx.a_factor.ln();
    for &s in &[0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
        let upper = ctx.char_exponent(Complex64::new(c0 + s, 0.0))?.re + c0 * log_a - s * w;
        if upper < -30.0 {
            return Ok(Some(0.0));
        }
        let lower = ctx.char_exponent(Complex64::new(c0 - s, 0.0))?.re + c0 * log_a + s * w;
        if lower < -30.0 {
            return Ok(Some(mass));
        }
    }
    Ok(None)
}

/// Half-line Gil-Pelaez tail integral for a finite measure whose
/// characteristic function is `cf`, after removing an atom of mass
/// `atom_mass` at `atom_at`. Returns integral over xi of
/// Re[e^{-i xi w} (cf(xi) - atom) / (i xi)].
fn tail_integral<F: Fn(f64) -> Result<Complex64>>(
    cf: F,
    atom_mass: f64,
    atom_at: f64,
    w: f64,
    xi_max: f64,
) -> Result<f64> {
    let integrand = |xi: f64| -> Result<f64> {
        let phase = Complex64::new(0.0, -xi * w).exp();
        let atom = atom_mass * Complex64::new(0.0, xi * atom_at).exp();
        let val = (phase * (cf(xi)? - atom)) / Complex64::new(0.0, xi);
        Ok(val.re)
    };
    // The integrand has a removable singularity at zero; one rectangle of
    // width XI_MIN at its limiting value covers [0, XI_MIN].
    let head = XI_MIN * integrand(XI_MIN)?;
    let mut failure: Option<Error> = None;
    let body = crate::quad::integrate_tol(
        |xi| match integrand(xi) {
            Ok(v) => v,
            Err(e) => {
                if failure.is_none() {
                    failure = Some(e);
                }
                f64::NAN
            }
        },
        XI_MIN,
        xi_max,
        1e-9,
        1e-9,
        16_000,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(head + body)
}

/// Price a European call by Fourier inversion; valid in the last delay
/// period (T - b <= t <= T) where the conditional law of S(T) is explicit.
pub fn price_fourier(
    model: &DelayedJumpModel,
    market: &MarketSpec,
    history: &HistoryPath,
    options: FourierOptions,
) -> Result<PricingResult> {
    let t = market.valuation_time;
    let tau = market.maturity - t;
    let spot = history.spot();

    // A worthless strike pays the asset itself.
    if market.strike == 0.0 {
        return Ok(PricingResult::deterministic(spot, "fourier"));
    }

    let ctx = FourierContext::new(model, market, history, options.convention)?;
    if ctx.g_squared < G_SQUARED_EPS {
        let price = (spot - market.strike * (-market.rate * tau).exp()).max(0.0);
        return Ok(PricingResult::deterministic(price, "fourier"));
    }

    let report = check_admissibility(model, market.rate, options.convention);
    if !report.passed() {
        return Err(Error::Validation(format!(
            "measure change not admissible: {}",
            report.failures().join("; ")
        )));
    }

    let a = ctx.a_factor();
    let w = match options.w_convention {
        WConvention::Derived => {
            (market.strike * (-market.rate * market.maturity).exp() / (ctx.disc_spot * a)).ln()
        }
        WConvention::Literal => (market.strike / a).ln() - market.rate * market.maturity,
    };
    let d = ctx.drift_shift();
    let atom = ctx.atom_mass();

    // Upper endpoint: where the full characteristic function magnitude has
    // flattened to its atom floor (or the hard cap).
    let mut xi_max = 64.0;
    while xi_max < XI_CAP {
        let mag = ctx.char_exponent(Complex64::new(0.0, xi_max))?.re.exp();
        if mag < 1e-12 || (mag - atom).abs() < 1e-4 * atom {
            break;
        }
        xi_max *= 2.0;
    }
    let xi_max = xi_max.min(XI_CAP);

    // Exact support gates: when every jump moves Y one way, thresholds on
    // the closed side of D pin the tails to 0 or the full mass.
    let support_gate = |mass: f64| -> Option<f64> {
        if w > d && !ctx.can_rise() {
            Some(0.0)
        } else if w <= d && !ctx.can_fall() {
            Some(mass)
        } else {
            None
        }
    };

    // Plain tail: Q(Y >= w), with an atom of mass `atom` at D and gates
    // for thresholds outside or far from the bulk.
    let p2 = if let Some(p) = support_gate(1.0) {
        p
    } else if let Some(p) = chernoff_tail(&ctx, 0.0, 1.0, w)? {
        p
    } else {
        let i2 = tail_integral(
            |xi| Ok(ctx.char_exponent(Complex64::new(0.0, xi))?.exp()),
            atom,
            d,
            w,
            xi_max,
        )?;
        atom * if d >= w { 1.0 } else { 0.0 } + 0.5 * (1.0 - atom) + i2 / std::f64::consts::PI
    };

    // Exponentially tilted tail: A E[e^Y 1{Y >= w}], total mass one.
    let tilted_atom = a * d.exp() * atom;
    let p1 = if let Some(p) = support_gate(1.0) {
        p
    } else if let Some(p) = chernoff_tail(&ctx, 1.0, 1.0, w)? {
        p
    } else {
        let i1 = tail_integral(
            |xi| {
                Ok(
                    (ctx.char_exponent(Complex64::new(1.0, xi))? + Complex64::new(a.ln(), 0.0))
                        .exp(),
                )
            },
            tilted_atom,
            d,
            w,
            xi_max,
        )?;
        tilted_atom * if d >= w { 1.0 } else { 0.0 }
            + 0.5 * (1.0 - tilted_atom)
            + i1 / std::f64::consts::PI
    };

    let v1 = spot * p1;
    let v2 = market.strike * (-market.rate * tau).exp() * p2;
    let price = (v1 - v2).max(0.0);

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("a_factor".into(), a);
    diagnostics.insert("atom_mass".into(), atom);
    diagnostics.insert("drift_shift".into(), d);
    diagnostics.insert("w_threshold".into(), w);
    diagnostics.insert("xi_max".into(), xi_max);
    diagnostics.insert("tail_plain".into(), p2);
    diagnostics.insert("tail_tilted".into(), p1);
    Ok(PricingResult {
        price,
        stderr: 0.0,
        method: "fourier".into(),
        n_paths: None,
        seed: None,
        diagnostics,
    })
}

/// Standard normal CDF through erfc, accurate to full double precision.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Risk-neutral Black-Scholes call price.
pub fn price_black_scholes(s0: f64, strike: f64, rate: f64, sigma: f64, tau: f64) -> f64 {
    if strike <= 0.0 {
        return s0;
    }
    if sigma <= 0.0 || tau <= 0.0 {
        return (s0 - strike * (-rate * tau).exp()).max(0.0);
    }
    let vol = sigma * tau.sqrt();
    let d1 = ((s0 / strike).ln() + (rate + 0.5 * sigma * sigma) * tau) / vol;
    let d2 = d1 - vol;
    s0 * normal_cdf(d1) - strike * (-rate * tau).exp() * normal_cdf(d2)
}

/// Black-Scholes-type closed form with physical drift `alpha` and
/// discounting at `rate`: e^{-r tau} E[(S_T - K)^+] for geometric Brownian
/// motion with drift alpha. Coincides with `price_black_scholes` at
/// alpha = rate.
pub fn price_bs_drifted(s0: f64, strike: f64, alpha: f64, rate: f64, sigma: f64, tau: f64) -> f64 {
    if strike <= 0.0 {
        return s0 * ((alpha - rate) * tau).exp();
    }
    if sigma <= 0.0 || tau <= 0.0 {
        return (-rate * tau).exp() * (s0 * (alpha * tau).exp() - strike).max(0.0);
    }
    let vol = sigma * tau.sqrt();
    let forward = s0 * (alpha * tau).exp();
    let d1 = ((s0 / strike).ln() + (alpha + 0.5 * sigma * sigma) * tau) / vol;
    let d2 = d1 - vol;
    (-rate * tau).exp() * (forward * normal_cdf(d1) - strike * normal_cdf(d2))
}

/// Monte Carlo price of a call on geometric Brownian motion simulated by
/// the logarithmic Euler scheme with drift `alpha`, discounted at `rate`.
/// With alpha != rate this is not arbitrage-free; it reproduces the
/// benchmark-table procedure.
#[allow(clippy::too_many_arguments)]
pub fn price_gbm_log_euler(
    s0: f64,
    alpha: f64,
    sigma: f64,
    rate: f64,
    strike: f64,
    maturity: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PricingResult> {
    if n_paths == 0 || steps == 0 {
        return Err(Error::InvalidInput(
            "need steps >= 1 and n_paths >= 1".into(),
        ));
    }
    let dt = maturity / steps as f64;
    let log_drift = (alpha - 0.5 * sigma * sigma) * dt;
    let vol = sigma * dt.sqrt();
    let disc = (-rate * maturity).exp();
    let payoffs: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::new(seed, i as u64);
            let mut log_s = s0.ln();
            for _ in 0..steps {
                log_s += log_drift + vol * rng.normal();
            }
            disc * (log_s.exp() - strike).max(0.0)
        })
        .collect();
    let (mean, se) = mean_and_stderr(&payoffs);
    Ok(PricingResult {
        price: mean,
        stderr: se,
        method: "bs_mc".into(),
        n_paths: Some(n_paths as u64),
        seed: Some(seed),
        diagnostics: BTreeMap::new(),
    })
}
