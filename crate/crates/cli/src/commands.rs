//! Command drivers: load the config, run, write artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use sdde_core::convergence::{coupled_errors, fit_rate, ConvergenceStudy, ErrorEstimate};
use sdde_core::engine::simulate_ensemble;
use sdde_core::measure::HistoryPath;
use sdde_core::pricer::{
    price_black_scholes, price_fourier, price_gbm_log_euler, price_mc, price_mc_conditional,
    FourierOptions, PricingResult,
};

use crate::config::{PriceMethod, RunConfig};
use crate::table;
use crate::CliError;

pub struct Ctx<'a> {
    pub config: &'a RunConfig,
    pub config_hash: String,
    pub out_dir: &'a Path,
    pub seed_override: Option<u64>,
}

impl Ctx<'_> {
    fn seed(&self, from_config: Option<u64>, command: &str) -> Result<u64, CliError> {
        self.seed_override.or(from_config).ok_or_else(|| {
            CliError::config(format!(
                "`{command}` is stochastic: set a seed in the config or pass --seed"
            ))
        })
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::create_dir_all(self.out_dir)
            .map_err(|e| CliError::config(format!("cannot create output dir: {e}")))?;
        fs::write(self.out_dir.join(name), bytes)
            .map_err(|e| CliError::config(format!("cannot write {name}: {e}")))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::numerical(format!("serialization: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

/// `simulate`: one long-format CSV with grid rows and jump rows.
pub fn cmd_simulate(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    let model = ctx.config.model()?;
    let grid = ctx.config.grid()?;
    let sim = ctx
        .config
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::config("missing `simulate` block".into()))?;
    let seed = ctx.seed(sim.seed, "simulate")?;

    let report = model.validate();
    if !report.passed() {
        eprintln!(
            "model validation failed:\n{}",
            serde_json::to_string_pretty(&report).unwrap_or_default()
        );
        return Err(CliError::validation("model validation failed".into()));
    }
    let paths = simulate_ensemble(&model, &grid, sim.n_paths, seed)?;

    let mut csv = String::from("path_id,time,value,is_jump\n");
    for (id, path) in paths.iter().enumerate() {
        let mut jump_idx = 0;
        for k in 0..=grid.steps() {
            let t = grid.time(k);
            while jump_idx < path.jumps.len() && path.jumps.times[jump_idx] <= t {
                let _ = writeln!(
                    csv,
                    "{id},{},{},1",
                    path.jumps.times[jump_idx], path.jump_values[jump_idx]
                );
                jump_idx += 1;
            }
            let _ = writeln!(csv, "{id},{t},{},0", path.values[k]);
        }
    }
    ctx.write("paths.csv", csv.as_bytes())?;
    ctx.write_json(
        "run.json",
        &json!({
            "command": "simulate",
            "config_hash": ctx.config_hash,
            "seed": seed,
            "n_paths": sim.n_paths,
            "outputs": ["paths.csv"],
        }),
    )?;
    eprintln!(
        "simulate: {} paths in {:.2}s",
        sim.n_paths,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

/// `price`: one JSON result document.
pub fn cmd_price(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    let pc = ctx
        .config
        .price
        .as_ref()
        .ok_or_else(|| CliError::config("missing `price` block".into()))?;
    let market = ctx.config.market()?;

    let result: PricingResult = match pc.method {
        PriceMethod::Bs => {
            let bs = pc
                .bs
                .ok_or_else(|| CliError::config("method `bs` needs a `bs` block".into()))?;
            let tau = market.maturity - market.valuation_time;
            let price = price_black_scholes(bs.s0, market.strike, market.rate, bs.sigma, tau);
            PricingResult {
                price,
                stderr: 0.0,
                method: "bs".into(),
                n_paths: None,
                seed: None,
                diagnostics: Default::default(),
            }
        }
        PriceMethod::BsMc => {
            let bs = pc
                .bs
                .ok_or_else(|| CliError::config("method `bs_mc` needs a `bs` block".into()))?;
            let n_paths = pc
                .n_paths
                .ok_or_else(|| CliError::config("method `bs_mc` needs `n_paths`".into()))?;
            let seed = ctx.seed(pc.seed, "price (bs_mc)")?;
            let steps = bs.steps.unwrap_or(256);
            price_gbm_log_euler(
                bs.s0,
                bs.alpha.unwrap_or(market.rate),
                bs.sigma,
                market.rate,
                market.strike,
                market.maturity - market.valuation_time,
                steps,
                n_paths,
                seed,
            )?
        }
        PriceMethod::Mc => {
            let model = ctx.config.model()?;
            let grid = ctx.config.grid()?;
            let n_paths = pc
                .n_paths
                .ok_or_else(|| CliError::config("method `mc` needs `n_paths`".into()))?;
            let seed = ctx.seed(pc.seed, "price (mc)")?;
            check_and_report_admissibility(ctx, &model, &market)?;
            if market.valuation_time == 0.0 && pc.history.is_none() {
                price_mc(
                    &model,
                    &market,
                    &grid,
                    n_paths,
                    seed,
                    ctx.config.theta_convention,
                )?
            } else {
                let history = history_for(ctx, &model, &grid, market.valuation_time)?;
                price_mc_conditional(
                    &model,
                    &market,
                    &history,
                    &grid,
                    n_paths,
                    seed,
                    ctx.config.theta_convention,
                )?
            }
        }
        PriceMethod::Fourier => {
            let model = ctx.config.model()?;
            let grid = ctx.config.grid()?;
            let t = market.valuation_time;
            if t < market.maturity - model.delay - 1e-12 {
                return Err(CliError::precondition(format!(
                    "valuation time {t} outside last delay period [{}, {}]",
                    market.maturity - model.delay,
                    market.maturity
                )));
            }
            check_and_report_admissibility(ctx, &model, &market)?;
            let history = history_for(ctx, &model, &grid, t)?;
            price_fourier(
                &model,
                &market,
                &history,
                FourierOptions {
                    convention: ctx.config.theta_convention,
                    w_convention: ctx.config.w_convention,
                },
            )?
        }
    };

    let wall = started.elapsed().as_secs_f64();
    ctx.write_json(
        "price.json",
        &json!({
            "command": "price",
            "config_hash": ctx.config_hash,
            "method": result.method,
            "price": result.price,
            "stderr": result.stderr,
            "n_paths": result.n_paths,
            "seed": result.seed,
            "diagnostics": result.diagnostics,
        }),
    )?;
    eprintln!(
        "price: {} = {:.6} +- {:.6} in {wall:.2}s",
        result.method, result.price, result.stderr
    );
    Ok(())
}

/// Run the measure-change admissibility checks and write the report next
/// to the price result. A riskless model (g identically zero) prices
/// through the deterministic branch and needs no measure change.
fn check_and_report_admissibility(
    ctx: &Ctx,
    model: &sdde_core::DelayedJumpModel,
    market: &sdde_core::measure::MarketSpec,
) -> Result<(), CliError> {
    if model.jump_scale.is_zero() {
        return Ok(());
    }
    let report =
        sdde_core::measure::check_admissibility(model, market.rate, ctx.config.theta_convention);
    ctx.write_json("admissibility.json", &report)?;
    for w in &report.warnings {
        eprintln!("admissibility warning: {w}");
    }
    if report.passed() {
        Ok(())
    } else {
        eprintln!("admissibility failed: {}", report.failures().join("; "));
        Err(CliError::validation(
            "measure change not admissible (see admissibility.json)".into(),
        ))
    }
}

/// Build the observed history for a conditional or Fourier price: explicit
/// values from the config, or derived from the initial segment when the
/// whole window [t - b, t] sits at or before time zero.
fn history_for(
    ctx: &Ctx,
    model: &sdde_core::DelayedJumpModel,
    grid: &sdde_core::SimGrid,
    t: f64,
) -> Result<HistoryPath, CliError> {
    match &ctx.config.price.as_ref().and_then(|p| p.history.clone()) {
        Some(values) => Ok(HistoryPath::new(
            t - model.delay,
            grid.dt(),
            values.clone(),
        )?),
        None if t == 0.0 => Ok(HistoryPath::from_initial(model, grid)?),
        None => Err(CliError::precondition(format!(
            "valuation time {t} > 0 needs an observed `history` in the price block"
        ))),
    }
}

/// `converge`: CSV of per-level errors plus a JSON summary with the fitted
/// slope and its pass/fail verdict.
pub fn cmd_converge(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    let cc = ctx
        .config
        .converge
        .as_ref()
        .ok_or_else(|| CliError::config("missing `converge` block".into()))?;
    if cc.exponents.len() < 4 {
        return Err(CliError::config(format!(
            "need >= 4 refinement levels, got {}",
            cc.exponents.len()
        )));
    }

    let (estimates, seed): (Vec<ErrorEstimate>, u64) = if let Some(slope) = cc.synthetic_slope {
        // Self-test mode: inject an exact power law.
        let grid_t = ctx.config.grid.as_ref().map(|g| g.horizon).unwrap_or(1.0);
        (
            cc.exponents
                .iter()
                .map(|&k| {
                    let dt = grid_t / (1u64 << k) as f64;
                    ErrorEstimate {
                        dt,
                        e_hat: dt.powf(slope),
                        stderr: 0.0,
                        mean_pow: dt.powf(slope * cc.p),
                    }
                })
                .collect(),
            0,
        )
    } else {
        let model = ctx.config.model()?;
        let grid = ctx.config.grid()?;
        let seed = ctx.seed(cc.seed, "converge")?;
        let study = ConvergenceStudy {
            model,
            horizon: grid.horizon(),
            coarse_exponents: cc.exponents.clone(),
            ref_exponent: cc.ref_exponent,
            n_paths: cc.n_paths,
            p: cc.p,
            seed,
        };
        (coupled_errors(&study)?, seed)
    };

    let fit = fit_rate(
        &estimates
            .iter()
            .map(|e| (e.dt, e.e_hat))
            .collect::<Vec<_>>(),
    )?;
    let passed = fit.slope >= cc.slope_threshold;

    let mut csv = String::from("delta,e_hat,stderr\n");
    for e in &estimates {
        let _ = writeln!(csv, "{},{},{}", e.dt, e.e_hat, e.stderr);
    }
    ctx.write("convergence.csv", csv.as_bytes())?;
    ctx.write_json(
        "summary.json",
        &json!({
            "command": "converge",
            "config_hash": ctx.config_hash,
            "seed": seed,
            "n_paths": cc.n_paths,
            "p": cc.p,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r2": fit.r_squared,
            "slope_threshold": cc.slope_threshold,
            "passed": passed,
        }),
    )?;
    eprintln!(
        "converge: slope {:.4} (R2 {:.4}) in {:.2}s",
        fit.slope,
        fit.r_squared,
        started.elapsed().as_secs_f64()
    );
    if passed {
        Ok(())
    } else {
        Err(CliError::numerical(format!(
            "fitted slope {:.4} below threshold {}",
            fit.slope, cc.slope_threshold
        )))
    }
}

/// `table`: benchmark comparison table as CSV and Markdown.
pub fn cmd_table(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    let tc = ctx
        .config
        .table
        .as_ref()
        .ok_or_else(|| CliError::config("missing `table` block".into()))?;
    let seed = ctx.seed(tc.seed, "table")?;

    let mut rows = Vec::new();
    for &months in &tc.months {
        rows.extend(table::expiry_rows(months, tc.n_paths, seed)?);
    }

    let mut csv = String::from(
        "months,strike,bs_mc_drifted,bs_mc_stderr,bs_closed_rn,jump_mc,jump_mc_stderr,ref_bs,ref_jump,ref_market\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.months,
            r.strike,
            r.bs_mc_drifted,
            r.bs_mc_stderr,
            r.bs_closed_risk_neutral,
            r.jump_mc,
            r.jump_mc_stderr,
            r.ref_bs.map_or(String::from(""), |v| v.to_string()),
            r.ref_jump.map_or(String::from(""), |v| v.to_string()),
            r.ref_market.map_or(String::from(""), |v| v.to_string()),
        );
    }
    ctx.write("table.csv", csv.as_bytes())?;
    let md = format!(
        "# Benchmark replication (not arbitrage-free: original-measure simulation, discounted at r)\n{}",
        table::to_markdown(&rows)
    );
    ctx.write("table.md", md.as_bytes())?;
    ctx.write_json(
        "run.json",
        &json!({
            "command": "table",
            "config_hash": ctx.config_hash,
            "seed": seed,
            "n_paths": tc.n_paths,
            "months": tc.months,
            "outputs": ["table.csv", "table.md"],
        }),
    )?;
    eprintln!(
        "table: {} rows in {:.2}s",
        rows.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
