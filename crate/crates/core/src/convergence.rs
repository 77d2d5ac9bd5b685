//! Empirical strong-convergence measurement.
//!
//! Each sampled jump stream drives one reference run (the exact
//! representation on a fine grid) and one scheme run per coarse step size,
//! so every error estimate compares two solutions of the same noise. The
//! sup-norm is sampled on the union of the coarse grid and the jump times;
//! between those points both paths are smooth exponentials.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{exact_path, interpolate, log_euler_path};
use crate::error::{Error, Result};
use crate::model::{DelayedJumpModel, JumpStream, SimGrid};
use crate::rng::CounterRng;

/// A coupled refinement study: dyadic coarse steps T / 2^k against a much
/// finer reference step T / 2^ref.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub model: DelayedJumpModel,
    pub horizon: f64,
    /// Coarse dyadic exponents (step T / 2^k), strictly increasing.
    pub coarse_exponents: Vec<u32>,
    /// Reference exponent, well above every coarse one.
    pub ref_exponent: u32,
    pub n_paths: usize,
    /// Error norm exponent p >= 1: reported errors are (E sup^p)^{1/p}.
    pub p: f64,
    pub seed: u64,
}

/// One per-step-size error estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub dt: f64,
    /// (mean of sup-error^p)^{1/p}.
    pub e_hat: f64,
    /// Standard error of `e_hat` (delta method).
    pub stderr: f64,
    /// Raw p-th moment estimate.
    pub mean_pow: f64,
}

impl ConvergenceStudy {
    fn grids(&self) -> Result<(SimGrid, Vec<SimGrid>)> {
        if self.coarse_exponents.is_empty() {
            return Err(Error::InvalidInput("study needs coarse levels".into()));
        }
        let max_coarse = *self.coarse_exponents.iter().max().expect("non-empty");
        if self.ref_exponent <= max_coarse {
            return Err(Error::InvalidInput(format!(
                "reference exponent {} must exceed every coarse exponent",
                self.ref_exponent
            )));
        }
        let reference = SimGrid::new(self.horizon, 1usize << self.ref_exponent)?;
        reference.delay_steps(self.model.delay)?;
        let coarse = self
            .coarse_exponents
            .iter()
            .map(|&k| {
                let g = SimGrid::new(self.horizon, 1usize << k)?;
                g.delay_steps(self.model.delay)?;
                Ok(g)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((reference, coarse))
    }
}

/// Per-level strong errors of the scheme against the fine-grid reference,
/// all levels coupled through one jump stream per path.
pub fn coupled_errors(study: &ConvergenceStudy) -> Result<Vec<ErrorEstimate>> {
    study.model.require_valid()?;
    if study.n_paths == 0 || study.p < 1.0 {
        return Err(Error::InvalidInput("need n_paths >= 1 and p >= 1".into()));
    }
    let (ref_grid, coarse_grids) = study.grids()?;
    let levels = coarse_grids.len();

    let per_path: Vec<Vec<f64>> = (0..study.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::new(study.seed, i as u64);
            let jumps = JumpStream::sample(&study.model.levy, study.horizon, &mut rng);
            let reference =
                exact_path(&study.model, &ref_grid, &jumps).map_err(|e| e.with_path(i))?;
            let mut sups = Vec::with_capacity(levels);
            for grid in &coarse_grids {
                let scheme =
                    log_euler_path(&study.model, grid, &jumps).map_err(|e| e.with_path(i))?;
                let stride = ref_grid.steps() / grid.steps();
                let mut sup = 0.0_f64;
                for (k, v) in scheme.values.iter().enumerate() {
                    sup = sup.max((v - reference.values[k * stride]).abs());
                }
                for (a, b) in scheme.jump_values.iter().zip(reference.jump_values.iter()) {
                    sup = sup.max((a - b).abs());
                }
                sups.push(sup.powf(study.p));
            }
            Ok(sups)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(summarize(&per_path, &coarse_grids, study.p))
}

fn summarize(per_path: &[Vec<f64>], grids: &[SimGrid], p: f64) -> Vec<ErrorEstimate> {
    let n = per_path.len() as f64;
    grids
        .iter()
        .enumerate()
        .map(|(level, grid)| {
            let mean = per_path.iter().map(|s| s[level]).sum::<f64>() / n;
            let var = per_path
                .iter()
                .map(|s| (s[level] - mean) * (s[level] - mean))
                .sum::<f64>()
                / (n - 1.0).max(1.0);
            let se_mean = (var / n).sqrt();
            let e_hat = mean.powf(1.0 / p);
            // d/dm m^{1/p} = m^{1/p - 1} / p.
            let stderr = if mean > 0.0 {
                se_mean * mean.powf(1.0 / p - 1.0) / p
            } else {
                0.0
            };
            ErrorEstimate {
                dt: grid.dt(),
                e_hat,
                stderr,
                mean_pow: mean,
            }
        })
        .collect()
}

/// Least-squares power-law fit of log e against log dt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Fit log(e) = slope * log(dt) + intercept over at least four levels.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 levels, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(dt, e)| !(dt > 0.0) || !(e > 0.0)) {
        return Err(Error::Fit("step sizes and errors must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|&(dt, _)| dt.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln()).collect();
    let n = xs.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / n;
    let y_bar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_bar) * (x - x_bar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - x_bar) * (y - y_bar))
        .sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all step sizes identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - y_bar) * (y - y_bar)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        residuals,
    })
}

/// Deviation of the scheme from its own step process, probed at interval
/// midpoints: estimates E|S(t_k + dt/2) - S(t_k)|^p per step size.
pub fn grid_holding_error(
    model: &DelayedJumpModel,
    horizon: f64,
    exponents: &[u32],
    n_paths: usize,
    seed: u64,
    p: f64,
) -> Result<Vec<ErrorEstimate>> {
    model.require_valid()?;
    if n_paths == 0 || p < 1.0 {
        return Err(Error::InvalidInput("need n_paths >= 1 and p >= 1".into()));
    }
    let mut out = Vec::with_capacity(exponents.len());
    for (level, &k) in exponents.iter().enumerate() {
        let grid = SimGrid::new(horizon, 1usize << k)?;
        grid.delay_steps(model.delay)?;
        let per_path: Vec<Vec<f64>> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = CounterRng::new(seed, ((level as u64) << 40) | i as u64);
                let jumps = JumpStream::sample(&model.levy, horizon, &mut rng);
                let path = log_euler_path(model, &grid, &jumps).map_err(|e| e.with_path(i))?;
                let mut acc = 0.0;
                for j in 0..grid.steps() {
                    let mid = grid.time(j) + 0.5 * grid.dt();
                    let v = interpolate(&path, model, mid)?;
                    acc += (v - path.values[j]).abs().powf(p);
                }
                Ok(vec![acc / grid.steps() as f64])
            })
            .collect::<Result<Vec<_>>>()?;
        let mut est = summarize(&per_path, &[grid], p);
        out.append(&mut est);
    }
    Ok(out)
}

/// Empirical E[sup_k S(t_k)^q] per step size; the witness for the uniform
/// moment bound (it must not explode as the grid refines).
pub fn sup_moment_estimates(
    model: &DelayedJumpModel,
    horizon: f64,
    exponents: &[u32],
    q: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    model.require_valid()?;
    let mut out = Vec::with_capacity(exponents.len());
    for (level, &k) in exponents.iter().enumerate() {
        let grid = SimGrid::new(horizon, 1usize << k)?;
        grid.delay_steps(model.delay)?;
        let sums: Vec<f64> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = CounterRng::new(seed, ((level as u64) << 40) | i as u64);
                let jumps = JumpStream::sample(&model.levy, horizon, &mut rng);
                let path = log_euler_path(model, &grid, &jumps).map_err(|e| e.with_path(i))?;
                let sup = path.values.iter().fold(0.0_f64, |a, &b| a.max(b));
                Ok(sup.powf(q))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(sums.iter().sum::<f64>() / n_paths as f64);
    }
    Ok(out)
}
