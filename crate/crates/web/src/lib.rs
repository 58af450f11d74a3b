//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each exported function takes plain numbers or JSON strings and returns
//! JSON. The `*_json` functions hold the logic so they can be tested natively.

use serde::Serialize;
use teachsim::agents::{
    mean_trial_scores, optimal_choice, run_condition_batch, run_dyad, Condition, SimConfig,
};
use teachsim::analysis::{canonical_weights, fit_window_utilities};
use teachsim::choicemodel::{
    cluster_choice_probabilities, object_pick_probability, PriorConfig, UtilityWeights,
};
use teachsim::env::{
    feature_name, generate_trial, score_choice, TrialBoard, ValueMap, NUM_FEATURES,
};
use teachsim::optimize::OptimizerConfig;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(err)
}

#[derive(Serialize)]
struct BoardReport {
    board: TrialBoard,
    cluster_probabilities: [f64; 4],
    pick_probabilities: Vec<(u32, f64)>,
    optimal_cluster: u8,
    optimal_score: i32,
}

pub fn board_json(
    seed: u32,
    trial: u32,
    theta_json: &str,
    counterbalanced: bool,
) -> Result<String, String> {
    let theta: Vec<f64> = serde_json::from_str(theta_json).map_err(err)?;
    let theta = UtilityWeights::from_slice(&theta).map_err(err)?;
    let config = SimConfig::default();
    let map = ValueMap::build(counterbalanced);
    let board = generate_trial(seed as u64, trial, &map, &config.generator).map_err(err)?;
    let opt = optimal_choice(&board);
    to_json(&BoardReport {
        cluster_probabilities: cluster_choice_probabilities(&theta, &board),
        pick_probabilities: board
            .objects
            .iter()
            .map(|o| (o.id, object_pick_probability(&theta, o)))
            .collect(),
        optimal_cluster: opt.chosen_cluster,
        optimal_score: score_choice(&board, &opt).map_err(err)?,
        board,
    })
}

#[derive(Serialize)]
struct ConditionReport {
    condition: Condition,
    mean: f64,
    sd: f64,
    curve: Vec<f64>,
}

pub fn simulate_json(seed: u32, dyads: u32) -> Result<String, String> {
    let config = SimConfig::default();
    let mut out = Vec::new();
    for cond in Condition::ALL {
        let run = run_condition_batch(cond, dyads as usize, seed as u64, &config).map_err(err)?;
        out.push(ConditionReport {
            condition: cond,
            mean: run.summary.mean,
            sd: run.summary.sd,
            curve: mean_trial_scores(&run.logs),
        });
    }
    to_json(&out)
}

#[derive(Serialize)]
struct FitReport {
    condition: Condition,
    features: Vec<String>,
    theta: Vec<f64>,
    log_posterior: f64,
    converged: bool,
    scores: Vec<i32>,
    final_score: i32,
}

pub fn fit_json(condition: &str, seed: u32, window: u32, lambda: f64) -> Result<String, String> {
    let condition: Condition = condition.parse().map_err(err)?;
    let config = SimConfig::default();
    let log = run_dyad(condition, 0, seed as u64, &config, &config.value_map).map_err(err)?;
    let prior = PriorConfig::new(lambda).map_err(err)?;
    let est = fit_window_utilities(&log, window as usize, &prior, &OptimizerConfig::default())
        .map_err(err)?;
    let theta = canonical_weights(&log, &est.theta);
    to_json(&FitReport {
        condition,
        features: (0..NUM_FEATURES).map(feature_name).collect(),
        theta: theta.as_array().to_vec(),
        log_posterior: est.log_posterior,
        converged: est.diagnostics.converged,
        scores: log.trials.iter().map(|t| t.score).collect(),
        final_score: log.final_score(),
    })
}

/// Board for `(seed, trial)` with choice probabilities under `theta_json`
/// (a JSON array of 19 weights).
#[wasm_bindgen]
pub fn board(
    seed: u32,
    trial: u32,
    theta_json: &str,
    counterbalanced: bool,
) -> Result<String, JsError> {
    board_json(seed, trial, theta_json, counterbalanced).map_err(|e| JsError::new(&e))
}

/// Per-condition mean final scores and learning curves.
#[wasm_bindgen]
pub fn simulate(seed: u32, dyads: u32) -> Result<String, JsError> {
    simulate_json(seed, dyads).map_err(|e| JsError::new(&e))
}

/// Runs one dyad and fits utilities over its last `window` trials.
#[wasm_bindgen]
pub fn fit(condition: &str, seed: u32, window: u32, lambda: f64) -> Result<String, JsError> {
    fit_json(condition, seed, window, lambda).map_err(|e| JsError::new(&e))
}
