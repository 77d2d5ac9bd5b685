//! Run configuration: a versioned JSON file with a model block, market and
//! grid data, and one sub-block per command.

use serde::Deserialize;

use sdde_core::coeff::{Coefficient, InitialSegment};
use sdde_core::jump::{JumpDistribution, LevySpec, NegTerm, PosTerm};
use sdde_core::measure::{MarketSpec, ThetaConvention};
use sdde_core::model::DelayedJumpModel;
use sdde_core::pricer::WConvention;
use sdde_core::SimGrid;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub market: Option<MarketConfig>,
    #[serde(default)]
    pub theta_convention: ThetaConvention,
    #[serde(default)]
    pub w_convention: WConvention,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub price: Option<PriceConfig>,
    #[serde(default)]
    pub converge: Option<ConvergeConfig>,
    #[serde(default)]
    pub table: Option<TableConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub f: Coefficient,
    pub g: Coefficient,
    pub phi: InitialSegment,
    pub delay: f64,
    pub levy: LevyConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyConfig {
    pub intensity: f64,
    #[serde(default)]
    pub pos_terms: Vec<PosTerm>,
    #[serde(default)]
    pub neg_terms: Vec<NegTerm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub rate: f64,
    pub strike: f64,
    pub maturity: f64,
    #[serde(default)]
    pub valuation_time: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_paths: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceMethod {
    Mc,
    Fourier,
    Bs,
    BsMc,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceConfig {
    pub method: PriceMethod,
    #[serde(default)]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Observed values on [t - b, t] at grid resolution, newest last.
    /// Optional: a valuation time of zero derives it from phi.
    #[serde(default)]
    pub history: Option<Vec<f64>>,
    /// Parameters for the Black-Scholes methods.
    #[serde(default)]
    pub bs: Option<BsParams>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsParams {
    pub s0: f64,
    pub sigma: f64,
    /// Physical drift for the simulated variant; defaults to the rate.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    /// Dyadic coarse exponents: step = horizon / 2^k.
    pub exponents: Vec<u32>,
    pub ref_exponent: u32,
    pub n_paths: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    pub seed: Option<u64>,
    /// Pass threshold on the fitted slope.
    #[serde(default = "default_slope_threshold")]
    pub slope_threshold: f64,
    /// Self-test: skip simulation and fit on e = dt^slope exactly.
    #[serde(default)]
    pub synthetic_slope: Option<f64>,
}

fn default_p() -> f64 {
    2.0
}

fn default_slope_threshold() -> f64 {
    0.4
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub n_paths: usize,
    pub seed: Option<u64>,
    #[serde(default = "default_months")]
    pub months: Vec<u32>,
}

fn default_months() -> Vec<u32> {
    vec![1, 3, 6]
}

impl RunConfig {
    pub fn parse(bytes: &[u8]) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_slice(bytes)
            .map_err(|e| CliError::config(format!("config parse error: {e}")))?;
        if config.version != 1 {
            return Err(CliError::config(format!(
                "unsupported config version {} (expected 1)",
                config.version
            )));
        }
        Ok(config)
    }

    pub fn model(&self) -> Result<DelayedJumpModel, CliError> {
        let mc = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::config("missing `model` block".into()))?;
        let dist = JumpDistribution::new(mc.levy.pos_terms.clone(), mc.levy.neg_terms.clone())
            .map_err(|e| CliError::config(format!("model.levy: {e}")))?;
        let levy = LevySpec::new(mc.levy.intensity, dist)
            .map_err(|e| CliError::config(format!("model.levy: {e}")))?;
        Ok(DelayedJumpModel {
            drift: mc.f.clone(),
            jump_scale: mc.g.clone(),
            initial: mc.phi.clone(),
            delay: mc.delay,
            levy,
        })
    }

    pub fn grid(&self) -> Result<SimGrid, CliError> {
        let gc = self
            .grid
            .as_ref()
            .ok_or_else(|| CliError::config("missing `grid` block".into()))?;
        SimGrid::new(gc.horizon, gc.steps).map_err(|e| CliError::config(format!("grid: {e}")))
    }

    pub fn market(&self) -> Result<MarketSpec, CliError> {
        let mc = self
            .market
            .as_ref()
            .ok_or_else(|| CliError::config("missing `market` block".into()))?;
        MarketSpec::new(mc.rate, mc.strike, mc.maturity, mc.valuation_time)
            .map_err(|e| CliError::config(format!("market: {e}")))
    }
}

/// 64-bit FNV-1a of the raw config bytes: the provenance tag embedded in
/// every output.
pub fn config_hash(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}
