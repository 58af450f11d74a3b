//! Simulated players.
//!
//! Learners hold a linear belief over the 19 features, refit by ridge
//! regression on every piece of evidence they have seen (their own net
//! scores, demonstrated net scores, and chat assertions), and act by
//! sampling from the choice model with their belief scaled by a temperature.
//! Demo teachers play optimally. Chat teachers with full visibility assert
//! feature values; with partial visibility they report the values of objects
//! the learner just collected.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::choicemodel::{sample_choice, ChoiceRecord, UtilityWeights};
use crate::env::{
    active_features, conjunction_feature, generate_trial, score_choice, Color, GeneratorConfig,
    Shape, TrialBoard, ValueMap, NUM_CLUSTERS, NUM_FEATURES,
};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

// ---------------------------------------------------------------------------
// Conditions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Communication {
    None,
    Demo,
    Chat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Full,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Condition {
    pub communication: Communication,
    pub visibility: Visibility,
}

impl Condition {
    pub const SOLO_FULL: Condition = Condition::new(Communication::None, Visibility::Full);
    pub const SOLO_PARTIAL: Condition = Condition::new(Communication::None, Visibility::Partial);
    pub const DEMO_FULL: Condition = Condition::new(Communication::Demo, Visibility::Full);
    pub const DEMO_PARTIAL: Condition = Condition::new(Communication::Demo, Visibility::Partial);
    pub const CHAT_FULL: Condition = Condition::new(Communication::Chat, Visibility::Full);
    pub const CHAT_PARTIAL: Condition = Condition::new(Communication::Chat, Visibility::Partial);

    pub const ALL: [Condition; 6] = [
        Condition::SOLO_FULL,
        Condition::SOLO_PARTIAL,
        Condition::DEMO_FULL,
        Condition::DEMO_PARTIAL,
        Condition::CHAT_FULL,
        Condition::CHAT_PARTIAL,
    ];

    pub const MULTIPLAYER: [Condition; 4] = [
        Condition::DEMO_FULL,
        Condition::DEMO_PARTIAL,
        Condition::CHAT_FULL,
        Condition::CHAT_PARTIAL,
    ];

    pub const fn new(communication: Communication, visibility: Visibility) -> Self {
        Condition {
            communication,
            visibility,
        }
    }

    pub fn is_solo(&self) -> bool {
        self.communication == Communication::None
    }

    /// Stable index used when deriving seeds.
    pub fn index(&self) -> u64 {
        Condition::ALL
            .iter()
            .position(|c| c == self)
            .expect("all conditions listed") as u64
    }

    pub fn name(&self) -> &'static str {
        match (self.communication, self.visibility) {
            (Communication::None, Visibility::Full) => "Solo-Full",
            (Communication::None, Visibility::Partial) => "Solo-Partial",
            (Communication::Demo, Visibility::Full) => "Demo-Full",
            (Communication::Demo, Visibility::Partial) => "Demo-Partial",
            (Communication::Chat, Visibility::Full) => "Chat-Full",
            (Communication::Chat, Visibility::Partial) => "Chat-Partial",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Condition::ALL
            .into_iter()
            .find(|c| c.name().to_ascii_lowercase() == norm)
            .ok_or_else(|| Error::InvalidInput(format!("unknown condition `{s}`")))
    }
}

impl TryFrom<String> for Condition {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Condition> for String {
    fn from(c: Condition) -> Self {
        c.name().to_string()
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SoloFullPolicy {
    Greedy,
    Softmax { temperature: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Ridge penalty of the learner's belief regression.
    pub ridge: f64,
    /// Learner acts on `belief / temperature`.
    pub temperature: f64,
    /// Messages a chat teacher sends per trial.
    pub assertion_budget: usize,
    /// Weight of chat evidence rows.
    pub reliability: f64,
    /// Weight of the learner's own net-score rows.
    pub score_weight: f64,
    /// Weight of demonstrated net-score rows.
    pub demo_weight: f64,
    pub solo_full_policy: SoloFullPolicy,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            ridge: 1.0,
            temperature: 2.0,
            assertion_budget: 2,
            reliability: 1.0,
            score_weight: 1.0,
            demo_weight: 1.0,
            solo_full_policy: SoloFullPolicy::Greedy,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "agent {name} must be positive, got {v}"
                )))
            }
        };
        positive(self.ridge, "ridge")?;
        positive(self.temperature, "temperature")?;
        if let SoloFullPolicy::Softmax { temperature } = self.solo_full_policy {
            positive(temperature, "solo temperature")?;
        }
        if self.assertion_budget == 0 {
            return Err(Error::Config("assertion_budget must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.reliability) {
            return Err(Error::Config("reliability must lie in [0, 1]".into()));
        }
        if self.score_weight < 0.0 || self.demo_weight < 0.0 {
            return Err(Error::Config(
                "evidence weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Everything a dyad needs besides its condition and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub agent: AgentConfig,
    pub generator: GeneratorConfig,
    /// Map in the uncounterbalanced frame.
    pub value_map: ValueMap,
    pub trials: usize,
    /// Counterbalance every odd-numbered dyad.
    pub alternate_counterbalance: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            agent: AgentConfig::default(),
            generator: GeneratorConfig::default(),
            value_map: ValueMap::default(),
            trials: 10,
            alternate_counterbalance: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.generator.validate()?;
        self.value_map.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn map_for_dyad(&self, dyad: usize) -> ValueMap {
        if self.alternate_counterbalance && dyad % 2 == 1 {
            self.value_map.counterbalance_swap()
        } else {
            self.value_map.clone()
        }
    }
}

// ---------------------------------------------------------------------------
// Beliefs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidenceKind {
    OwnScore,
    Demo,
    Assertion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub features: [f64; NUM_FEATURES],
    pub value: f64,
    pub weight: f64,
    pub kind: EvidenceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerBelief {
    pub theta_hat: [f64; NUM_FEATURES],
    pub store: Vec<Evidence>,
    pub ridge: f64,
}

impl LearnerBelief {
    pub fn new(ridge: f64) -> Self {
        LearnerBelief {
            theta_hat: [0.0; NUM_FEATURES],
            store: Vec::new(),
            ridge,
        }
    }

    pub fn weights(&self) -> UtilityWeights {
        UtilityWeights::new(self.theta_hat).expect("ridge solution is finite")
    }

    fn push(&mut self, features: [f64; NUM_FEATURES], value: f64, weight: f64, kind: EvidenceKind) {
        self.store.push(Evidence {
            features,
            value,
            weight,
            kind,
        });
    }

    /// Weighted ridge regression over the whole store:
    /// `(ridge I + A' W A) theta = A' W b`.
    pub fn refit(&mut self) {
        let n = NUM_FEATURES;
        let mut gram = DMatrix::<f64>::identity(n, n) * self.ridge;
        let mut rhs = DVector::<f64>::zeros(n);
        for e in &self.store {
            for i in 0..n {
                if e.features[i] == 0.0 {
                    continue;
                }
                rhs[i] += e.weight * e.features[i] * e.value;
                for j in 0..n {
                    gram[(i, j)] += e.weight * e.features[i] * e.features[j];
                }
            }
        }
        let solution = gram
            .cholesky()
            .expect("ridge-regularized Gram matrix is positive definite")
            .solve(&rhs);
        for (t, s) in self.theta_hat.iter_mut().zip(solution.iter()) {
            *t = *s;
        }
    }
}

fn summed_features<'a>(
    objects: impl IntoIterator<Item = &'a crate::env::GameObject>,
) -> [f64; NUM_FEATURES] {
    let mut row = [0.0; NUM_FEATURES];
    for o in objects {
        for i in active_features(o.color, o.shape) {
            row[i] += 1.0;
        }
    }
    row
}

fn picked_objects<'a>(
    board: &'a TrialBoard,
    choice: &'a ChoiceRecord,
) -> impl Iterator<Item = &'a crate::env::GameObject> {
    choice.picked_ids().filter_map(|id| board.object(id))
}

/// Records the learner's own trial: summed features of picked objects
/// against the net score.
pub fn update_from_score(
    belief: &mut LearnerBelief,
    board: &TrialBoard,
    picks: &ChoiceRecord,
    net_score: i32,
    weight: f64,
) {
    let row = summed_features(picked_objects(board, picks));
    belief.push(row, net_score as f64, weight, EvidenceKind::OwnScore);
    belief.refit();
}

/// Records a watched demonstration as one summed-feature row.
pub fn update_from_demo(
    belief: &mut LearnerBelief,
    board: &TrialBoard,
    demo: &ChoiceRecord,
    visibility_of_features: bool,
    weight: f64,
) -> Result<()> {
    if !visibility_of_features {
        return Ok(());
    }
    let score = score_choice(board, demo)?;
    let row = summed_features(picked_objects(board, demo));
    belief.push(row, score as f64, weight, EvidenceKind::Demo);
    belief.refit();
    Ok(())
}

// ---------------------------------------------------------------------------
// Teachers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scope", rename_all = "lowercase")]
pub enum AssertionScope {
    Feature { index: usize, value: f64 },
    Object { id: u32, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureAssertion {
    #[serde(flatten)]
    pub scope: AssertionScope,
    pub reliability: f64,
}

/// Picks the strictly positive objects of the cluster whose positive values
/// sum highest; ties go to the lowest cluster index.
pub fn optimal_choice(board: &TrialBoard) -> ChoiceRecord {
    let mut best = 0;
    let mut best_sum = i32::MIN;
    for c in 0..NUM_CLUSTERS {
        let s: i32 = board.cluster(c).map(|o| o.value.max(0)).sum();
        if s > best_sum {
            best_sum = s;
            best = c;
        }
    }
    ChoiceRecord {
        trial_index: board.trial_index,
        chosen_cluster: best as u8,
        picks: board.cluster(best).map(|o| (o.id, o.value > 0)).collect(),
    }
}

pub fn learner_act(
    belief: &LearnerBelief,
    board: &TrialBoard,
    temperature: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ChoiceRecord> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let theta = belief.weights().scaled(1.0 / temperature)?;
    Ok(sample_choice(&theta, board, rng))
}

/// Chat teacher messages for one trial.
///
/// With full visibility the teacher names color/shape conjunctions in order
/// of the magnitude of their midpoint value (positive before negative on
/// ties). With partial visibility the teacher reports the values of the
/// objects the learner collected, or of the visited cluster when nothing was
/// collected.
pub fn chat_teach(
    board: &TrialBoard,
    visibility: Visibility,
    value_map: &ValueMap,
    learner_choice: &ChoiceRecord,
    assertion_budget: usize,
    reliability: f64,
) -> Result<Vec<FeatureAssertion>> {
    if assertion_budget == 0 {
        return Err(Error::InvalidInput(
            "a chat teacher must send at least one message".into(),
        ));
    }
    let out = match visibility {
        Visibility::Full => {
            let mut cells: Vec<(usize, f64)> = Vec::new();
            for color in Color::ALL {
                for shape in Shape::ALL {
                    if let Some(iv) = value_map.interval(shape, color) {
                        cells.push((conjunction_feature(color, shape), iv.midpoint()));
                    }
                }
            }
            cells.sort_by(|a, b| {
                b.1.abs()
                    .total_cmp(&a.1.abs())
                    .then(b.1.total_cmp(&a.1))
                    .then(a.0.cmp(&b.0))
            });
            cells
                .into_iter()
                .take(assertion_budget)
                .map(|(index, value)| FeatureAssertion {
                    scope: AssertionScope::Feature { index, value },
                    reliability,
                })
                .collect()
        }
        Visibility::Partial => {
            let picked: Vec<u32> = learner_choice.picked_ids().collect();
            let ids: Vec<u32> = if picked.is_empty() {
                learner_choice.picks.keys().copied().collect()
            } else {
                picked
            };
            ids.into_iter()
                .filter_map(|id| board.object(id))
                .take(assertion_budget)
                .map(|o| FeatureAssertion {
                    scope: AssertionScope::Object {
                        id: o.id,
                        value: o.value as f64,
                    },
                    reliability,
                })
                .collect()
        }
    };
    Ok(out)
}

pub fn update_from_assertions(
    belief: &mut LearnerBelief,
    board: &TrialBoard,
    assertions: &[FeatureAssertion],
) {
    if assertions.is_empty() {
        return;
    }
    for a in assertions {
        match a.scope {
            AssertionScope::Feature { index, value } => {
                if index >= NUM_FEATURES {
                    log::warn!("ignoring assertion about unknown feature {index}");
                    continue;
                }
                let mut row = [0.0; NUM_FEATURES];
                row[index] = 1.0;
                belief.push(row, value, a.reliability, EvidenceKind::Assertion);
            }
            AssertionScope::Object { id, value } => match board.object(id) {
                Some(o) => {
                    let row = summed_features(std::iter::once(o));
                    belief.push(row, value, a.reliability, EvidenceKind::Assertion);
                }
                None => log::warn!("ignoring assertion about unknown object {id}"),
            },
        }
    }
    belief.refit();
}

/// Renders assertions as the chat text a teacher might have typed.
pub fn render_chat(
    board: &TrialBoard,
    assertions: &[FeatureAssertion],
    learner_score: i32,
) -> String {
    const ORDINALS: [&str; 5] = ["first", "second", "third", "fourth", "fifth"];
    let mut parts: Vec<String> = Vec::new();
    if learner_score > 0 {
        parts.push("good job".to_string());
    }
    for (k, a) in assertions.iter().enumerate() {
        match a.scope {
            AssertionScope::Feature { index, value } => {
                parts.push(format!(
                    "{} worth {}",
                    crate::env::feature_name(index).replace('_', " "),
                    fmt_value(value)
                ));
            }
            AssertionScope::Object { id, value } => {
                let ord = ORDINALS.get(k).copied().unwrap_or("next");
                let side = match board.object(id).map(|o| o.cluster_id) {
                    Some(0) => "top left",
                    Some(1) => "top right",
                    Some(2) => "bottom left",
                    _ => "bottom right",
                };
                parts.push(format!("{ord} one {side} was {}", fmt_value(value)));
            }
        }
    }
    parts.join(", ")
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v:.1}")
    }
}

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "event", rename_all = "lowercase")]
pub enum TeachingEvent {
    None,
    Demo {
        choice: ChoiceRecord,
        score: i32,
    },
    Chat {
        assertions: Vec<FeatureAssertion>,
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u32,
    pub board: TrialBoard,
    pub choice: ChoiceRecord,
    pub score: i32,
    pub teaching: TeachingEvent,
    pub cumulative_score: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub condition: Condition,
    pub dyad: usize,
    pub seed: u64,
    pub config_hash: String,
    pub counterbalanced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: EpisodeHeader,
    pub trials: Vec<TrialRecord>,
}

impl EpisodeLog {
    pub fn final_score(&self) -> i32 {
        self.trials.last().map_or(0, |t| t.cumulative_score)
    }

    pub fn condition(&self) -> Condition {
        self.header.condition
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for t in &self.trials {
            out.push_str(&serde_json::to_string(t)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses a log; corrupt trial lines are skipped and counted.
    pub fn from_jsonl(text: &str) -> Result<(EpisodeLog, usize)> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: EpisodeHeader = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| Error::InvalidInput("empty episode log".into()))?,
        )?;
        let mut trials = Vec::new();
        let mut skipped = 0;
        for line in lines {
            match serde_json::from_str::<TrialRecord>(line) {
                Ok(t) if t.board.validate().is_ok() && t.choice.validate(&t.board).is_ok() => {
                    trials.push(t)
                }
                Ok(_) | Err(_) => {
                    log::warn!("skipping corrupt trial line in dyad {} log", header.dyad);
                    skipped += 1;
                }
            }
        }
        Ok((EpisodeLog { header, trials }, skipped))
    }

    /// Checks that every teaching event matches the condition.
    pub fn validate(&self) -> Result<()> {
        for t in &self.trials {
            let ok = matches!(
                (self.header.condition.communication, &t.teaching),
                (Communication::None, TeachingEvent::None)
                    | (Communication::Demo, TeachingEvent::Demo { .. })
                    | (Communication::Chat, TeachingEvent::Chat { .. })
            );
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "trial {} teaching event does not match {}",
                    t.trial, self.header.condition
                )));
            }
        }
        Ok(())
    }
}

const BOARD_STREAM: u64 = 1;
const LEARNER_STREAM: u64 = 2;

fn solo_full_choice(
    board: &TrialBoard,
    policy: SoloFullPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<ChoiceRecord> {
    match policy {
        SoloFullPolicy::Greedy => Ok(optimal_choice(board)),
        SoloFullPolicy::Softmax { temperature } => {
            // The player sees values, so the per-cell value acts as utility.
            let mut theta = [0.0; NUM_FEATURES];
            let mut counts = [0.0; NUM_FEATURES];
            for o in &board.objects {
                let k = conjunction_feature(o.color, o.shape);
                theta[k] += o.value as f64;
                counts[k] += 1.0;
            }
            for (t, n) in theta.iter_mut().zip(counts) {
                if n > 0.0 {
                    *t /= n * temperature;
                }
            }
            Ok(sample_choice(&UtilityWeights::new(theta)?, board, rng))
        }
    }
}

/// Plays one episode under `condition` on boards generated from `seed`.
pub fn run_dyad(
    condition: Condition,
    dyad: usize,
    seed: u64,
    config: &SimConfig,
    value_map: &ValueMap,
) -> Result<EpisodeLog> {
    config.validate()?;
    let agent = &config.agent;
    let board_seed = derive_seed(seed, &[BOARD_STREAM]);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[LEARNER_STREAM]));
    let mut belief = LearnerBelief::new(agent.ridge);
    let mut cumulative = 0;
    let mut trials = Vec::with_capacity(config.trials);

    for t in 0..config.trials as u32 {
        let board = generate_trial(board_seed, t, value_map, &config.generator)?;
        let choice = if condition == Condition::SOLO_FULL {
            solo_full_choice(&board, agent.solo_full_policy, &mut rng)?
        } else {
            learner_act(&belief, &board, agent.temperature, &mut rng)?
        };
        let score = score_choice(&board, &choice)?;
        cumulative += score;

        let teaching = if condition == Condition::SOLO_FULL {
            TeachingEvent::None
        } else {
            update_from_score(&mut belief, &board, &choice, score, agent.score_weight);
            match condition.communication {
                Communication::None => TeachingEvent::None,
                Communication::Demo => {
                    let demo = optimal_choice(&board);
                    let demo_score = score_choice(&board, &demo)?;
                    update_from_demo(&mut belief, &board, &demo, true, agent.demo_weight)?;
                    TeachingEvent::Demo {
                        choice: demo,
                        score: demo_score,
                    }
                }
                Communication::Chat => {
                    let assertions = chat_teach(
                        &board,
                        condition.visibility,
                        value_map,
                        &choice,
                        agent.assertion_budget,
                        agent.reliability,
                    )?;
                    update_from_assertions(&mut belief, &board, &assertions);
                    let text = render_chat(&board, &assertions, score);
                    TeachingEvent::Chat { assertions, text }
                }
            }
        };

        trials.push(TrialRecord {
            trial: t,
            board,
            choice,
            score,
            teaching,
            cumulative_score: cumulative,
        });
    }

    Ok(EpisodeLog {
        header: EpisodeHeader {
            condition,
            dyad,
            seed,
            config_hash: config.config_hash(),
            counterbalanced: value_map.is_counterbalanced(),
        },
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadScore {
    pub dyad: usize,
    pub seed: u64,
    pub final_score: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub condition: Condition,
    pub dyads: Vec<DyadScore>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single dyad.
    pub sd: f64,
}

impl BatchSummary {
    pub fn from_scores(condition: Condition, dyads: Vec<DyadScore>) -> Self {
        let n = dyads.len() as f64;
        let mean = dyads.iter().map(|d| d.final_score as f64).sum::<f64>() / n;
        let sd = if dyads.len() > 1 {
            (dyads
                .iter()
                .map(|d| (d.final_score as f64 - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        } else {
            0.0
        };
        BatchSummary {
            condition,
            dyads,
            mean,
            sd,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchRun {
    pub summary: BatchSummary,
    pub logs: Vec<EpisodeLog>,
}

pub fn dyad_seed(master: u64, condition: Condition, dyad: usize) -> u64 {
    derive_seed(master, &[condition.index(), dyad as u64])
}

/// Runs `n_dyads` independent dyads; results are ordered by dyad index.
pub fn run_condition_batch(
    condition: Condition,
    n_dyads: usize,
    seed: u64,
    config: &SimConfig,
) -> Result<BatchRun> {
    if n_dyads == 0 {
        return Err(Error::InvalidInput(
            "a batch needs at least one dyad".into(),
        ));
    }
    config.validate()?;
    let run = |d: usize| {
        run_dyad(
            condition,
            d,
            dyad_seed(seed, condition, d),
            config,
            &config.map_for_dyad(d),
        )
    };
    #[cfg(feature = "parallel")]
    let logs: Vec<EpisodeLog> = {
        use rayon::prelude::*;
        (0..n_dyads)
            .into_par_iter()
            .map(run)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let logs: Vec<EpisodeLog> = (0..n_dyads).map(run).collect::<Result<_>>()?;

    let dyads = logs
        .iter()
        .map(|l| DyadScore {
            dyad: l.header.dyad,
            seed: l.header.seed,
            final_score: l.final_score(),
        })
        .collect();
    Ok(BatchRun {
        summary: BatchSummary::from_scores(condition, dyads),
        logs,
    })
}

/// Mean per-trial learner score for a batch, e.g. for learning curves.
pub fn mean_trial_scores(logs: &[EpisodeLog]) -> Vec<f64> {
    let mut sums: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for l in logs {
        for t in &l.trials {
            let e = sums.entry(t.trial).or_default();
            e.0 += t.score as f64;
            e.1 += 1;
        }
    }
    sums.values().map(|(s, n)| s / *n as f64).collect()
}
