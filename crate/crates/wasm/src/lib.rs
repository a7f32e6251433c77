//! Browser bindings: decision probabilities by group size, a short simulation
//! summarised as a return CCDF, and the mean-field group-size distribution.
//!
//! The plain functions are ordinary Rust and run natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use herding_core::analysis::{ccdf, fit_power_law_auto};
use herding_core::engine::{rescale_returns, run, SimConfig};
use herding_core::meanfield::{solve_stationary, SolverOptions};
use herding_core::strategy::VoteMode;
use herding_core::voting::{ConsensusParameter, FragmentationTable};
use wasm_bindgen::prelude::*;

/// Demo limits, so a click cannot freeze the tab.
pub const MAX_CURVE_SIZE: u32 = 2_000;
pub const CURVE_POINTS: usize = 160;
pub const MAX_AGENTS: usize = 20_000;
pub const MAX_STEPS: u64 = 2_000_000;
pub const MAX_MEANFIELD_AGENTS: usize = 2_000;

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionCurve {
    sizes: Vec<f64>,
    fragment: Vec<f64>,
    trade: Vec<f64>,
    merge: Vec<f64>,
}

#[wasm_bindgen]
impl DecisionCurve {
    #[wasm_bindgen(getter)]
    pub fn sizes(&self) -> Vec<f64> {
        self.sizes.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn fragment(&self) -> Vec<f64> {
        self.fragment.clone()
    }
    /// Buy plus sell.
    #[wasm_bindgen(getter)]
    pub fn trade(&self) -> Vec<f64> {
        self.trade.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn merge(&self) -> Vec<f64> {
        self.merge.clone()
    }
}

/// Group sizes from 1 to `max_size`, every size while they are dense and
/// geometrically spaced after that.
pub fn curve_sizes(max_size: u32) -> Vec<u32> {
    let max_size = max_size.clamp(1, MAX_CURVE_SIZE);
    let ratio = (max_size as f64).powf(1.0 / (CURVE_POINTS - 1) as f64);
    let mut sizes: Vec<u32> = (0..CURVE_POINTS).map(|i| ratio.powi(i as i32).round() as u32).collect();
    sizes.push(max_size);
    sizes.dedup();
    sizes
}

pub fn decision_curve(x: f64, max_size: u32) -> herding_core::Result<DecisionCurve> {
    let x = ConsensusParameter::new(x)?;
    let sizes = curve_sizes(max_size);
    let mut table = FragmentationTable::new(x, *sizes.last().unwrap() as usize);
    let mut curve = DecisionCurve { sizes: Vec::new(), fragment: Vec::new(), trade: Vec::new(), merge: Vec::new() };
    for s in sizes {
        let p = table.probabilities(s);
        curve.sizes.push(s as f64);
        curve.fragment.push(p.fragment);
        curve.trade.push(p.buy + p.sell);
        curve.merge.push(p.merge);
    }
    Ok(curve)
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    values: Vec<f64>,
    probabilities: Vec<f64>,
    trade_fraction: f64,
    alpha: f64,
    alpha_stderr: f64,
    largest_group: u32,
}

#[wasm_bindgen]
impl SimulationResult {
    /// Distinct absolute rescaled returns.
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
    /// `P(|r| >= value)`.
    #[wasm_bindgen(getter)]
    pub fn probabilities(&self) -> Vec<f64> {
        self.probabilities.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn trade_fraction(&self) -> f64 {
        self.trade_fraction
    }
    /// Density tail exponent, NaN when the tail is too short to fit.
    #[wasm_bindgen(getter)]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    #[wasm_bindgen(getter)]
    pub fn alpha_stderr(&self) -> f64 {
        self.alpha_stderr
    }
    #[wasm_bindgen(getter)]
    pub fn largest_group(&self) -> u32 {
        self.largest_group
    }
}

pub fn simulate(
    n_agents: usize,
    x: f64,
    steps: u64,
    seed: u64,
    iid_votes: bool,
    rescale_k: usize,
) -> herding_core::Result<SimulationResult> {
    let mut cfg = SimConfig::new(n_agents.min(MAX_AGENTS), x, steps.clamp(10, MAX_STEPS))?;
    cfg.seed = seed;
    cfg.vote_mode = if iid_votes { VoteMode::IidUniform } else { VoteMode::StrategyDriven };
    cfg.rescale_k = rescale_k.max(1);
    let (series, summary) = run(&cfg)?;
    let rescaled = rescale_returns(&series, cfg.rescale_k)?;
    let (values, probabilities) = match ccdf(&rescaled) {
        Ok(c) => c.points.iter().map(|&(v, p)| (v as f64, p)).unzip(),
        Err(_) => (Vec::new(), Vec::new()),
    };
    let sizes: Vec<f64> = series.trade_sizes().into_iter().filter(|v| *v > 0).map(|v| v as f64).collect();
    let (alpha, alpha_stderr) = fit_power_law_auto(&sizes).map_or((f64::NAN, f64::NAN), |(f, _)| (f.alpha_density, f.stderr));
    Ok(SimulationResult {
        values,
        probabilities,
        trade_fraction: summary.trade_fraction,
        alpha,
        alpha_stderr,
        largest_group: summary.final_histogram.last().map_or(0, |(s, _)| *s as u32),
    })
}

pub fn meanfield(n_agents: usize, x: f64) -> herding_core::Result<Vec<f64>> {
    let x = ConsensusParameter::new(x)?;
    let (d, _) = solve_stationary(n_agents.clamp(2, MAX_MEANFIELD_AGENTS), x, SolverOptions::default())?;
    Ok(d.as_slice()[1..].to_vec())
}

fn js(e: herding_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Fragment / trade / merge probabilities at [`curve_sizes`]`(max_size)`.
#[wasm_bindgen(js_name = decisionCurve)]
pub fn decision_curve_js(x: f64, max_size: u32) -> Result<DecisionCurve, JsError> {
    decision_curve(x, max_size).map_err(js)
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(
    n_agents: usize,
    x: f64,
    steps: u64,
    seed: u64,
    iid_votes: bool,
    rescale_k: usize,
) -> Result<SimulationResult, JsError> {
    simulate(n_agents, x, steps, seed, iid_votes, rescale_k).map_err(js)
}

/// Stationary mean-field `n_s` for `s = 1..=n_agents`.
#[wasm_bindgen(js_name = meanfield)]
pub fn meanfield_js(n_agents: usize, x: f64) -> Result<Vec<f64>, JsError> {
    meanfield(n_agents, x).map_err(js)
}
