//! Nested logistic choice model over clusters and objects.
//!
//! An object's utility is `U(x) = phi(x) . theta`. Inside the chosen cluster
//! each object is picked independently with probability `sigmoid(U(x))`
//! (the skip alternative has utility 0). A cluster's utility is the expected
//! utility of its objects under those pick probabilities, and clusters are
//! chosen by a softmax over the four cluster utilities. A Laplace prior on
//! each weight turns the MAP fit into L1-regularized maximum likelihood.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    active_features, GameObject, TrialBoard, NUM_CLUSTERS, NUM_FEATURES, OBJECTS_PER_CLUSTER,
};
use crate::error::{Error, Result};
use crate::optimize::{multi_start, OptimizationResult, OptimizerConfig};

/// Feature weights in canonical feature order. Always finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UtilityWeights([f64; NUM_FEATURES]);

impl UtilityWeights {
    pub fn new(theta: [f64; NUM_FEATURES]) -> Result<Self> {
        if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "theta[{i}] = {} is not finite",
                theta[i]
            )));
        }
        Ok(UtilityWeights(theta))
    }

    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        let arr: [f64; NUM_FEATURES] = theta.try_into().map_err(|_| {
            Error::Domain(format!(
                "expected {NUM_FEATURES} weights, got {}",
                theta.len()
            ))
        })?;
        Self::new(arr)
    }

    pub fn zeros() -> Self {
        UtilityWeights([0.0; NUM_FEATURES])
    }

    pub fn as_array(&self) -> &[f64; NUM_FEATURES] {
        &self.0
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn with(mut self, index: usize, value: f64) -> Result<Self> {
        self.0[index] = value;
        Self::new(self.0)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.map(|v| v * factor))
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_distance(&self, other: &UtilityWeights) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Exchanges every pink feature weight with the matching yellow one.
    pub fn counterbalanced(&self) -> Self {
        use crate::env::{color_feature, conjunction_feature, Color, Shape};
        let mut out = self.0;
        out.swap(color_feature(Color::Pink), color_feature(Color::Yellow));
        for s in Shape::ALL {
            out.swap(
                conjunction_feature(Color::Pink, s),
                conjunction_feature(Color::Yellow, s),
            );
        }
        UtilityWeights(out)
    }

    pub fn object_utility(&self, object: &GameObject) -> f64 {
        active_features(object.color, object.shape)
            .iter()
            .map(|&i| self.0[i])
            .sum()
    }
}

impl TryFrom<Vec<f64>> for UtilityWeights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_slice(&v)
    }
}

impl From<UtilityWeights> for Vec<f64> {
    fn from(w: UtilityWeights) -> Self {
        w.0.to_vec()
    }
}

/// One trial's two-stage decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub trial_index: u32,
    pub chosen_cluster: u8,
    /// Pick (`true`) or skip for each object of the chosen cluster.
    pub picks: BTreeMap<u32, bool>,
}

impl ChoiceRecord {
    /// Checks that the picks cover exactly the objects of the chosen cluster.
    pub fn validate(&self, board: &TrialBoard) -> Result<()> {
        let cluster = self.chosen_cluster as usize;
        if cluster >= NUM_CLUSTERS {
            return Err(Error::InvalidChoice(format!(
                "cluster {cluster} out of range"
            )));
        }
        let ids: Vec<u32> = board.cluster(cluster).map(|o| o.id).collect();
        let keys: Vec<u32> = self.picks.keys().copied().collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted != keys {
            return Err(Error::InvalidChoice(format!(
                "picks {keys:?} do not match objects {sorted:?} of cluster {cluster}"
            )));
        }
        Ok(())
    }

    pub fn picked_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.picks.iter().filter(|(_, &p)| p).map(|(&id, _)| id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub board: TrialBoard,
    pub choice: ChoiceRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChoiceDataset {
    pub trials: Vec<Trial>,
}

/// One line of the choice-dataset JSONL format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetLine {
    pub trial: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub board: Option<TrialBoard>,
    /// Trial index of a board supplied separately.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub board_ref: Option<u32>,
    pub cluster: u8,
    pub picks: BTreeMap<u32, bool>,
}

impl ChoiceDataset {
    pub fn new(trials: Vec<Trial>) -> Result<Self> {
        for t in &trials {
            t.choice.validate(&t.board)?;
        }
        Ok(ChoiceDataset { trials })
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Serializes with inline boards, one trial per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for t in &self.trials {
            let line = DatasetLine {
                trial: t.choice.trial_index,
                board: Some(t.board.clone()),
                board_ref: None,
                cluster: t.choice.chosen_cluster,
                picks: t.choice.picks.clone(),
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses JSONL; `boards` resolves `board_ref` entries by trial index.
    pub fn from_jsonl(text: &str, boards: &[TrialBoard]) -> Result<Self> {
        let mut trials = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let l: DatasetLine = serde_json::from_str(line)?;
            let board = match (l.board, l.board_ref) {
                (Some(b), _) => b,
                (None, Some(r)) => boards
                    .iter()
                    .find(|b| b.trial_index == r)
                    .cloned()
                    .ok_or_else(|| {
                        Error::InvalidInput(format!("line {}: unknown board_ref {r}", n + 1))
                    })?,
                (None, None) => {
                    return Err(Error::InvalidInput(format!("line {}: no board", n + 1)));
                }
            };
            board.validate()?;
            trials.push(Trial {
                board,
                choice: ChoiceRecord {
                    trial_index: l.trial,
                    chosen_cluster: l.cluster,
                    picks: l.picks,
                },
            });
        }
        Self::new(trials)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub lambda: f64,
}

impl PriorConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!(
                "prior scale must be positive, got {lambda}"
            )));
        }
        Ok(PriorConfig { lambda })
    }
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig { lambda: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub best_start_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEstimate {
    pub theta: UtilityWeights,
    pub log_posterior: f64,
    pub diagnostics: FitDiagnostics,
}

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn log_sigmoid(u: f64) -> f64 {
    -softplus(-u)
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Softmax with max-subtraction.
pub fn softmax(values: &[f64]) -> Vec<f64> {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

pub fn object_pick_probability(theta: &UtilityWeights, object: &GameObject) -> f64 {
    sigmoid(theta.object_utility(object))
}

fn check_cluster(cluster_id: usize) -> Result<()> {
    if cluster_id >= NUM_CLUSTERS {
        return Err(Error::InvalidChoice(format!(
            "cluster {cluster_id} out of range"
        )));
    }
    Ok(())
}

/// Expected utility of a set of objects under the pick model.
pub fn expected_utility<'a>(
    theta: &UtilityWeights,
    objects: impl IntoIterator<Item = &'a GameObject>,
) -> f64 {
    objects
        .into_iter()
        .map(|o| {
            let u = theta.object_utility(o);
            u * sigmoid(u)
        })
        .sum()
}

pub fn cluster_utility(
    theta: &UtilityWeights,
    board: &TrialBoard,
    cluster_id: usize,
) -> Result<f64> {
    check_cluster(cluster_id)?;
    Ok(expected_utility(theta, board.cluster(cluster_id)))
}

pub fn cluster_utilities(theta: &UtilityWeights, board: &TrialBoard) -> [f64; NUM_CLUSTERS] {
    std::array::from_fn(|c| expected_utility(theta, board.cluster(c)))
}

pub fn cluster_choice_probabilities(
    theta: &UtilityWeights,
    board: &TrialBoard,
) -> [f64; NUM_CLUSTERS] {
    let p = softmax(&cluster_utilities(theta, board));
    std::array::from_fn(|i| p[i])
}

/// `log p(cluster) + sum over the chosen cluster's objects of log p(y_i | x_i)`.
pub fn trial_log_likelihood(
    theta: &UtilityWeights,
    board: &TrialBoard,
    choice: &ChoiceRecord,
) -> Result<f64> {
    choice.validate(board)?;
    let utilities = cluster_utilities(theta, board);
    let chosen = choice.chosen_cluster as usize;
    let mut ll = utilities[chosen] - log_sum_exp(&utilities);
    for o in board.cluster(chosen) {
        let u = theta.object_utility(o);
        ll += if choice.picks[&o.id] {
            log_sigmoid(u)
        } else {
            log_sigmoid(-u)
        };
    }
    Ok(ll)
}

pub fn log_prior(theta: &UtilityWeights, prior: &PriorConfig) -> f64 {
    let lam = prior.lambda;
    theta
        .as_array()
        .iter()
        .map(|t| (lam / 2.0).ln() - lam * t.abs())
        .sum()
}

pub fn log_likelihood(theta: &UtilityWeights, data: &ChoiceDataset) -> Result<f64> {
    data.trials
        .iter()
        .map(|t| trial_log_likelihood(theta, &t.board, &t.choice))
        .sum()
}

pub fn log_posterior(
    theta: &UtilityWeights,
    data: &ChoiceDataset,
    prior: &PriorConfig,
) -> Result<f64> {
    Ok(log_likelihood(theta, data)? + log_prior(theta, prior))
}

/// Draws a cluster from the softmax, then picks each of its objects
/// independently.
pub fn sample_choice<R: Rng + ?Sized>(
    theta: &UtilityWeights,
    board: &TrialBoard,
    rng: &mut R,
) -> ChoiceRecord {
    let probs = cluster_choice_probabilities(theta, board);
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    let mut chosen = NUM_CLUSTERS - 1;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            chosen = i;
            break;
        }
    }
    let picks = board
        .cluster(chosen)
        .map(|o| (o.id, rng.gen::<f64>() < object_pick_probability(theta, o)))
        .collect();
    ChoiceRecord {
        trial_index: board.trial_index,
        chosen_cluster: chosen as u8,
        picks,
    }
}

// ---------------------------------------------------------------------------
// Fast objective
// ---------------------------------------------------------------------------

const NUM_CELLS: usize = 12;

fn cell_index(o: &GameObject) -> usize {
    o.color.index() * 3 + o.shape.feature_slot()
}

/// The dataset reduced to per-cell counts. Every object of a cell shares the
/// same feature vector, so the log-likelihood only needs twelve utilities per
/// evaluation.
#[derive(Debug, Clone)]
pub struct CompiledDataset {
    /// (picked, skipped) counts per cell, over chosen clusters only.
    pick_counts: [[f64; 2]; NUM_CELLS],
    /// Cell counts summed over the chosen clusters.
    chosen_counts: [f64; NUM_CELLS],
    /// Distinct cluster compositions.
    clusters: Vec<ClusterCells>,
    /// Per trial, indices into `clusters`.
    trials: Vec<[u32; NUM_CLUSTERS]>,
}

/// Sparse (cell, count) entries; unused slots have count 0.
type ClusterCells = [(u8, u8); OBJECTS_PER_CLUSTER];

// exp(5 * 120) stays well inside f64 range.
const FAST_PATH_LIMIT: f64 = 120.0;

impl CompiledDataset {
    pub fn new(data: &ChoiceDataset) -> Result<Self> {
        let mut pick_counts = [[0.0; 2]; NUM_CELLS];
        let mut chosen_counts = [0.0; NUM_CELLS];
        let mut trials = Vec::with_capacity(data.len());
        let mut clusters = Vec::new();
        let mut lookup: HashMap<ClusterCells, u32> = HashMap::new();
        for t in &data.trials {
            t.choice.validate(&t.board)?;
            let mut counts = [[0u8; NUM_CELLS]; NUM_CLUSTERS];
            for o in &t.board.objects {
                counts[o.cluster_id as usize][cell_index(o)] += 1;
            }
            let chosen = t.choice.chosen_cluster as usize;
            for o in t.board.cluster(chosen) {
                let slot = if t.choice.picks[&o.id] { 0 } else { 1 };
                pick_counts[cell_index(o)][slot] += 1.0;
                chosen_counts[cell_index(o)] += 1.0;
            }
            let mut ids = [0u32; NUM_CLUSTERS];
            for (id, row) in ids.iter_mut().zip(counts.iter()) {
                let mut cells: ClusterCells = [(0, 0); OBJECTS_PER_CLUSTER];
                let nonzero = row.iter().enumerate().filter(|(_, &n)| n > 0);
                for (slot, (cell, &n)) in cells.iter_mut().zip(nonzero) {
                    *slot = (cell as u8, n);
                }
                *id = *lookup.entry(cells).or_insert_with(|| {
                    clusters.push(cells);
                    (clusters.len() - 1) as u32
                });
            }
            trials.push(ids);
        }
        Ok(CompiledDataset {
            pick_counts,
            chosen_counts,
            clusters,
            trials,
        })
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let mut expected = [0.0; NUM_CELLS];
        let mut ll = 0.0;
        for color in 0..4 {
            for slot in 0..3 {
                let cell = color * 3 + slot;
                let u = theta[color] + theta[4 + slot] + theta[7 + cell];
                expected[cell] = u * sigmoid(u);
                let [picked, skipped] = self.pick_counts[cell];
                if picked > 0.0 {
                    ll += picked * log_sigmoid(u);
                }
                if skipped > 0.0 {
                    ll += skipped * log_sigmoid(-u);
                }
                ll += self.chosen_counts[cell] * expected[cell];
            }
        }
        let biggest = expected.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        if biggest < FAST_PATH_LIMIT {
            ll - self.log_partition_fast(&expected)
        } else {
            ll - self.log_partition_stable(&expected)
        }
    }

    /// Sum of per-trial log partition functions. Cluster weights come from a
    /// power table; the running product is kept as mantissa and exponent so a
    /// single `ln` suffices.
    fn log_partition_fast(&self, expected: &[f64; NUM_CELLS]) -> f64 {
        let mut powers = [[1.0; OBJECTS_PER_CLUSTER + 1]; NUM_CELLS];
        for (row, &g) in powers.iter_mut().zip(expected.iter()) {
            let e = g.exp();
            for k in 1..row.len() {
                row[k] = row[k - 1] * e;
            }
        }
        let weights: Vec<f64> = self
            .clusters
            .iter()
            .map(|cells| {
                cells
                    .iter()
                    .map(|&(cell, n)| powers[cell as usize][n as usize])
                    .product()
            })
            .collect();
        let mut mantissa = 1.0f64;
        let mut exponent = 0i64;
        for ids in &self.trials {
            let z: f64 = ids.iter().map(|&i| weights[i as usize]).sum();
            mantissa *= z;
            let (m, e) = split_exponent(mantissa);
            mantissa = m;
            exponent += e;
        }
        mantissa.ln() + exponent as f64 * std::f64::consts::LN_2
    }

    fn log_partition_stable(&self, expected: &[f64; NUM_CELLS]) -> f64 {
        let utilities: Vec<f64> = self
            .clusters
            .iter()
            .map(|cells| {
                cells
                    .iter()
                    .map(|&(cell, n)| n as f64 * expected[cell as usize])
                    .sum()
            })
            .collect();
        self.trials
            .iter()
            .map(|ids| log_sum_exp(&ids.map(|i| utilities[i as usize])))
            .sum()
    }

    pub fn log_posterior(&self, theta: &[f64], prior: &PriorConfig) -> f64 {
        let lam = prior.lambda;
        let lp: f64 = theta.iter().map(|t| (lam / 2.0).ln() - lam * t.abs()).sum();
        self.log_likelihood(theta) + lp
    }
}

/// Split a positive normal float into a mantissa in [1, 2) and its binary exponent.
fn split_exponent(x: f64) -> (f64, i64) {
    const EXP_MASK: u64 = 0x7ff << 52;
    let bits = x.to_bits();
    let e = ((bits & EXP_MASK) >> 52) as i64 - 1023;
    (f64::from_bits((bits & !EXP_MASK) | (1023 << 52)), e)
}

/// Starting points for a MAP fit: the origin followed by
/// `config.restart_count` points drawn uniformly from `[-1, 1]^19`.
pub fn fit_starts(config: &OptimizerConfig) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts = vec![vec![0.0; NUM_FEATURES]];
    for _ in 0..config.restart_count {
        starts.push(
            (0..NUM_FEATURES)
                .map(|_| rng.gen_range(-1.0..=1.0))
                .collect(),
        );
    }
    starts
}

/// MAP estimate of the utility weights, by minimizing the negative log
/// posterior with Powell's method from several starts.
pub fn fit_map(
    data: &ChoiceDataset,
    prior: &PriorConfig,
    config: &OptimizerConfig,
) -> Result<MapEstimate> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    fit(data, prior, config)
}

/// Fit with no observations; the estimate is the prior mode.
pub fn fit_prior_only(prior: &PriorConfig, config: &OptimizerConfig) -> Result<MapEstimate> {
    fit(&ChoiceDataset::default(), prior, config)
}

fn fit(data: &ChoiceDataset, prior: &PriorConfig, config: &OptimizerConfig) -> Result<MapEstimate> {
    PriorConfig::new(prior.lambda)?;
    let compiled = CompiledDataset::new(data)?;
    let objective = |x: &[f64]| -compiled.log_posterior(x, prior);
    let starts = fit_starts(config);
    let ms = multi_start(objective, &starts, config)?;
    let OptimizationResult {
        x_star,
        iterations,
        evaluations,
        converged,
        ..
    } = ms.best;
    let theta = UtilityWeights::from_slice(&x_star)?;
    Ok(MapEstimate {
        log_posterior: log_posterior(&theta, data, prior)?,
        theta,
        diagnostics: FitDiagnostics {
            iterations,
            evaluations,
            restarts: starts.len() - 1,
            converged,
            best_start_index: ms.best_index,
        },
    })
}
