//! The game world: value map, board generation, featurization, scoring and
//! per-role observation masks.
//!
//! Spatial gameplay is abstracted to the two-stage decision (pick a cluster,
//! then collect or skip each object in it). Positions are generated only so
//! that logs look like the real game; they never enter scoring or likelihoods.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::choicemodel::ChoiceRecord;
use crate::error::{Error, Result};
use crate::seed::mix_seed;

pub const NUM_CLUSTERS: usize = 4;
pub const OBJECTS_PER_CLUSTER: usize = 5;
pub const OBJECTS_PER_BOARD: usize = NUM_CLUSTERS * OBJECTS_PER_CLUSTER;
pub const NUM_FEATURES: usize = 19;
pub const GRID_SIZE: u8 = 20;
pub const MAX_ABS_VALUE: i32 = 10;

/// Cluster centres: the four corners of the board.
const CLUSTER_CENTERS: [(u8, u8); NUM_CLUSTERS] = [(3, 3), (3, 16), (16, 3), (16, 16)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Circle,
    Triangle,
    Square,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Circle, Shape::Triangle, Shape::Square];

    /// Position of this shape inside the shape block of the feature vector,
    /// which is ordered circle, square, triangle.
    pub fn feature_slot(self) -> usize {
        match self {
            Shape::Circle => 0,
            Shape::Square => 1,
            Shape::Triangle => 2,
        }
    }

    fn grid_row(self) -> usize {
        match self {
            Shape::Circle => 0,
            Shape::Triangle => 1,
            Shape::Square => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Triangle => "triangle",
            Shape::Square => "square",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Cyan,
    White,
    Yellow,
    Pink,
}

impl Color {
    pub const ALL: [Color; 4] = [Color::Cyan, Color::White, Color::Yellow, Color::Pink];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Pink and yellow trade places; cyan and white are fixed.
    pub fn counterbalanced(self) -> Color {
        match self {
            Color::Pink => Color::Yellow,
            Color::Yellow => Color::Pink,
            c => c,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Cyan => "cyan",
            Color::White => "white",
            Color::Yellow => "yellow",
            Color::Pink => "pink",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidInput(format!("unknown shape `{s}`")))
    }
}

impl FromStr for Color {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Color::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidInput(format!("unknown color `{s}`")))
    }
}

/// Inclusive integer range of point values for one shape/color cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: i32,
    pub hi: i32,
}

impl Interval {
    pub const fn new(lo: i32, hi: i32) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, v: i32) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        (self.lo + self.hi) as f64 / 2.0
    }
}

/// One (shape, color) cell of a value map in its serialized form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellRange {
    pub shape: Shape,
    pub color: Color,
    pub lo: i32,
    pub hi: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValueMapRepr {
    cells: Vec<CellRange>,
    #[serde(default)]
    counterbalanced: bool,
}

/// Mapping from (shape, color) to the range of point values objects of that
/// kind can take. Cells without an interval are never generated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ValueMapRepr", into = "ValueMapRepr")]
pub struct ValueMap {
    grid: [[Option<Interval>; 4]; 3],
    counterbalanced: bool,
}

impl ValueMap {
    /// Builds the default grid; with `counterbalance` the pink and yellow
    /// columns are swapped for every shape.
    pub fn build(counterbalance: bool) -> ValueMap {
        let mut grid = [[None; 4]; 3];
        let mut set = |s: Shape, c: Color, lo, hi| {
            grid[s.grid_row()][c.index()] = Some(Interval::new(lo, hi))
        };
        set(Shape::Circle, Color::Pink, 8, 10);
        set(Shape::Circle, Color::White, 4, 6);
        set(Shape::Circle, Color::Cyan, 1, 3);
        set(Shape::Square, Color::Yellow, -10, -8);
        set(Shape::Square, Color::White, -6, -4);
        set(Shape::Square, Color::Cyan, -3, -1);
        for c in Color::ALL {
            set(Shape::Triangle, c, 0, 0);
        }
        let map = ValueMap {
            grid,
            counterbalanced: false,
        };
        if counterbalance {
            map.counterbalance_swap()
        } else {
            map
        }
    }

    pub fn from_cells(cells: &[CellRange], counterbalanced: bool) -> Result<ValueMap> {
        let mut grid = [[None; 4]; 3];
        for cell in cells {
            let slot = &mut grid[cell.shape.grid_row()][cell.color.index()];
            if slot.is_some() {
                return Err(Error::ValueMap(format!(
                    "duplicate cell ({}, {})",
                    cell.shape, cell.color
                )));
            }
            *slot = Some(Interval::new(cell.lo, cell.hi));
        }
        let map = ValueMap {
            grid,
            counterbalanced,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        for shape in Shape::ALL {
            for color in Color::ALL {
                let Some(iv) = self.interval(shape, color) else {
                    continue;
                };
                let bad = |why: &str| {
                    Err(Error::ValueMap(format!(
                        "({shape}, {color}) [{}, {}]: {why}",
                        iv.lo, iv.hi
                    )))
                };
                if iv.lo > iv.hi {
                    return bad("lo > hi");
                }
                if iv.lo < -MAX_ABS_VALUE || iv.hi > MAX_ABS_VALUE {
                    return bad("bounds outside [-10, 10]");
                }
                let sign_ok = match shape {
                    Shape::Circle => iv.lo > 0,
                    Shape::Triangle => iv.lo == 0 && iv.hi == 0,
                    Shape::Square => iv.hi < 0,
                };
                if !sign_ok {
                    return bad("sign inconsistent with shape");
                }
            }
        }
        Ok(())
    }

    pub fn interval(&self, shape: Shape, color: Color) -> Option<Interval> {
        self.grid[shape.grid_row()][color.index()]
    }

    pub fn is_counterbalanced(&self) -> bool {
        self.counterbalanced
    }

    /// Swaps the pink and yellow columns and toggles the counterbalance flag.
    pub fn counterbalance_swap(&self) -> ValueMap {
        let mut grid = self.grid;
        for row in grid.iter_mut() {
            row.swap(Color::Pink.index(), Color::Yellow.index());
        }
        ValueMap {
            grid,
            counterbalanced: !self.counterbalanced,
        }
    }

    /// Color actually rendered for a color named in the uncounterbalanced frame.
    pub fn display_color(&self, canonical: Color) -> Color {
        if self.counterbalanced {
            canonical.counterbalanced()
        } else {
            canonical
        }
    }

    pub fn cells(&self) -> Vec<CellRange> {
        let mut out = Vec::new();
        for shape in Shape::ALL {
            for color in Color::ALL {
                if let Some(iv) = self.interval(shape, color) {
                    out.push(CellRange {
                        shape,
                        color,
                        lo: iv.lo,
                        hi: iv.hi,
                    });
                }
            }
        }
        out
    }
}

impl Default for ValueMap {
    fn default() -> Self {
        ValueMap::build(false)
    }
}

impl TryFrom<ValueMapRepr> for ValueMap {
    type Error = Error;

    fn try_from(r: ValueMapRepr) -> Result<Self> {
        ValueMap::from_cells(&r.cells, r.counterbalanced)
    }
}

impl From<ValueMap> for ValueMapRepr {
    fn from(m: ValueMap) -> Self {
        ValueMapRepr {
            cells: m.cells(),
            counterbalanced: m.counterbalanced,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameObject {
    pub id: u32,
    pub shape: Shape,
    pub color: Color,
    pub value: i32,
    #[serde(rename = "cluster")]
    pub cluster_id: u8,
    #[serde(rename = "pos", default, skip_serializing_if = "Option::is_none")]
    pub position: Option<(u8, u8)>,
}

impl GameObject {
    pub fn features(&self) -> FeatureVector {
        featurize(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialBoard {
    pub trial_index: u32,
    pub objects: Vec<GameObject>,
}

impl TrialBoard {
    /// Structural checks: 20 objects, four clusters of five, unique ids,
    /// values within [-10, 10] and sign consistent with shape.
    pub fn validate(&self) -> Result<()> {
        if self.objects.len() != OBJECTS_PER_BOARD {
            return Err(Error::Board(format!(
                "expected {OBJECTS_PER_BOARD} objects, found {}",
                self.objects.len()
            )));
        }
        let mut per_cluster = [0usize; NUM_CLUSTERS];
        let mut ids: Vec<u32> = Vec::with_capacity(OBJECTS_PER_BOARD);
        for o in &self.objects {
            let c = o.cluster_id as usize;
            if c >= NUM_CLUSTERS {
                return Err(Error::Board(format!("object {} has cluster {c}", o.id)));
            }
            per_cluster[c] += 1;
            ids.push(o.id);
            if o.value.abs() > MAX_ABS_VALUE {
                return Err(Error::Board(format!(
                    "object {} value {} out of range",
                    o.id, o.value
                )));
            }
            let sign_ok = match o.shape {
                Shape::Circle => o.value > 0,
                Shape::Triangle => o.value == 0,
                Shape::Square => o.value < 0,
            };
            if !sign_ok {
                return Err(Error::Board(format!(
                    "object {} is a {} with value {}",
                    o.id, o.shape, o.value
                )));
            }
        }
        if per_cluster.iter().any(|&n| n != OBJECTS_PER_CLUSTER) {
            return Err(Error::Board(format!("cluster sizes {per_cluster:?}")));
        }
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Board("duplicate object ids".into()));
        }
        Ok(())
    }

    /// Additionally checks every value against the map's interval.
    pub fn validate_against(&self, map: &ValueMap) -> Result<()> {
        self.validate()?;
        for o in &self.objects {
            match map.interval(o.shape, o.color) {
                Some(iv) if iv.contains(o.value) => {}
                _ => {
                    return Err(Error::Board(format!(
                        "object {} ({} {}) value {} not allowed by the value map",
                        o.id, o.color, o.shape, o.value
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn cluster(&self, cluster_id: usize) -> impl Iterator<Item = &GameObject> {
        self.objects
            .iter()
            .filter(move |o| o.cluster_id as usize == cluster_id)
    }

    pub fn object(&self, id: u32) -> Option<&GameObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Pink/yellow recoloring of every object.
    pub fn recolored(&self) -> TrialBoard {
        let mut b = self.clone();
        for o in &mut b.objects {
            o.color = o.color.counterbalanced();
        }
        b
    }
}

/// Binary feature indicators: colors (cyan, white, yellow, pink), shapes
/// (circle, square, triangle), then the twelve color-by-shape conjunctions,
/// color-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureVector([bool; NUM_FEATURES]);

impl FeatureVector {
    pub fn bits(&self) -> &[bool; NUM_FEATURES] {
        &self.0
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    pub fn to_f64(&self) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        for (o, &b) in out.iter_mut().zip(self.0.iter()) {
            *o = if b { 1.0 } else { 0.0 };
        }
        out
    }

    pub fn dot(&self, weights: &[f64; NUM_FEATURES]) -> f64 {
        self.active().map(|i| weights[i]).sum()
    }
}

pub fn color_feature(color: Color) -> usize {
    color.index()
}

pub fn shape_feature(shape: Shape) -> usize {
    4 + shape.feature_slot()
}

pub fn conjunction_feature(color: Color, shape: Shape) -> usize {
    7 + color.index() * 3 + shape.feature_slot()
}

/// The three active feature indices of a (color, shape) pair.
pub fn active_features(color: Color, shape: Shape) -> [usize; 3] {
    [
        color_feature(color),
        shape_feature(shape),
        conjunction_feature(color, shape),
    ]
}

pub fn feature_name(index: usize) -> String {
    const SHAPES: [&str; 3] = ["circle", "square", "triangle"];
    match index {
        0..=3 => Color::ALL[index].name().to_string(),
        4..=6 => SHAPES[index - 4].to_string(),
        7..=18 => {
            let k = index - 7;
            format!("{}_{}", Color::ALL[k / 3].name(), SHAPES[k % 3])
        }
        _ => panic!("feature index {index} out of range"),
    }
}

pub fn featurize(object: &GameObject) -> FeatureVector {
    let mut bits = [false; NUM_FEATURES];
    for i in active_features(object.color, object.shape) {
        bits[i] = true;
    }
    FeatureVector(bits)
}

/// Sums of points collected by a choice.
pub fn score_choice(board: &TrialBoard, choice: &ChoiceRecord) -> Result<i32> {
    let cluster = choice.chosen_cluster as usize;
    if cluster >= NUM_CLUSTERS {
        return Err(Error::InvalidChoice(format!(
            "cluster {cluster} out of range"
        )));
    }
    let mut total = 0;
    for (&id, &picked) in &choice.picks {
        let obj = board
            .object(id)
            .ok_or_else(|| Error::InvalidChoice(format!("unknown object {id}")))?;
        if obj.cluster_id as usize != cluster {
            return Err(Error::InvalidChoice(format!(
                "object {id} is in cluster {}, not the chosen cluster {cluster}",
                obj.cluster_id
            )));
        }
        if picked {
            total += obj.value;
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellWeight {
    pub shape: Shape,
    pub color: Color,
    pub weight: f64,
}

/// A cluster theme. Colors in `weights` are named in the uncounterbalanced
/// frame and are recolored through the value map at sampling time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Archetype {
    pub name: String,
    pub weights: Vec<CellWeight>,
    /// Number of objects in the cluster drawn from circle cells only.
    #[serde(default)]
    pub min_circles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorConfig {
    /// Each board assigns the four archetypes to the four clusters in a
    /// random order.
    Themed { archetypes: Vec<Archetype> },
    /// Every mapped cell equally likely.
    Uniform,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        use Color::*;
        use Shape::*;
        let arch = |name: &str, min_circles, w: &[(Shape, Color, f64)]| Archetype {
            name: name.to_string(),
            weights: w
                .iter()
                .map(|&(shape, color, weight)| CellWeight {
                    shape,
                    color,
                    weight,
                })
                .collect(),
            min_circles,
        };
        GeneratorConfig::Themed {
            archetypes: vec![
                arch(
                    "circle-rich",
                    2,
                    &[
                        (Circle, Pink, 0.15),
                        (Circle, White, 0.25),
                        (Circle, Cyan, 0.25),
                        (Triangle, Pink, 0.05),
                        (Triangle, White, 0.05),
                        (Triangle, Cyan, 0.05),
                        (Triangle, Yellow, 0.05),
                        (Square, White, 0.05),
                        (Square, Cyan, 0.10),
                    ],
                ),
                arch(
                    "pink-rich",
                    0,
                    &[
                        (Circle, Pink, 0.30),
                        (Triangle, Pink, 0.30),
                        (Circle, White, 0.10),
                        (Circle, Cyan, 0.05),
                        (Triangle, White, 0.05),
                        (Triangle, Cyan, 0.05),
                        (Triangle, Yellow, 0.05),
                        (Square, Cyan, 0.05),
                        (Square, White, 0.05),
                    ],
                ),
                arch(
                    "yellow-rich",
                    0,
                    &[
                        (Triangle, Yellow, 0.30),
                        (Square, Yellow, 0.30),
                        (Circle, White, 0.10),
                        (Circle, Cyan, 0.10),
                        (Circle, Pink, 0.05),
                        (Square, White, 0.05),
                        (Square, Cyan, 0.05),
                        (Triangle, White, 0.05),
                    ],
                ),
                arch(
                    "mixed-negative",
                    0,
                    &[
                        (Square, Yellow, 0.15),
                        (Square, White, 0.20),
                        (Square, Cyan, 0.20),
                        (Circle, Pink, 0.10),
                        (Circle, White, 0.10),
                        (Circle, Cyan, 0.10),
                        (Triangle, Cyan, 0.075),
                        (Triangle, White, 0.075),
                    ],
                ),
            ],
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let GeneratorConfig::Themed { archetypes } = self else {
            return Ok(());
        };
        if archetypes.len() != NUM_CLUSTERS {
            return Err(Error::Config(format!(
                "themed generator needs {NUM_CLUSTERS} archetypes, got {}",
                archetypes.len()
            )));
        }
        for a in archetypes {
            if a.weights
                .iter()
                .any(|w| !(w.weight >= 0.0) || !w.weight.is_finite())
            {
                return Err(Error::Config(format!(
                    "archetype `{}` has a negative weight",
                    a.name
                )));
            }
            let total: f64 = a.weights.iter().map(|w| w.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "archetype `{}` weights sum to {total}, expected 1",
                    a.name
                )));
            }
            if a.min_circles > OBJECTS_PER_CLUSTER {
                return Err(Error::Config(format!(
                    "archetype `{}` min_circles {} exceeds cluster size",
                    a.name, a.min_circles
                )));
            }
        }
        Ok(())
    }
}

/// Weighted cell table resolved against a particular value map.
struct CellSampler {
    cells: Vec<(Shape, Color)>,
    dist: WeightedIndex<f64>,
}

impl CellSampler {
    fn new(weights: impl IntoIterator<Item = (Shape, Color, f64)>, map: &ValueMap) -> Option<Self> {
        let mut cells = Vec::new();
        let mut w = Vec::new();
        for (shape, canonical, weight) in weights {
            let color = map.display_color(canonical);
            if weight > 0.0 && map.interval(shape, color).is_some() {
                cells.push((shape, color));
                w.push(weight);
            }
        }
        let dist = WeightedIndex::new(&w).ok()?;
        Some(CellSampler { cells, dist })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (Shape, Color) {
        self.cells[self.dist.sample(rng)]
    }
}

const MAX_GENERATION_ATTEMPTS: usize = 1000;

/// Generates one board deterministically from `(rng_seed, trial_index)`.
///
/// Boards are redrawn until at least one positive object exists, so some
/// cluster always has a strictly positive optimal value.
pub fn generate_trial(
    rng_seed: u64,
    trial_index: u32,
    value_map: &ValueMap,
    config: &GeneratorConfig,
) -> Result<TrialBoard> {
    value_map.validate()?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(rng_seed, trial_index as u64));

    let uniform_cells: Vec<(Shape, Color, f64)> = Shape::ALL
        .into_iter()
        .flat_map(|s| Color::ALL.into_iter().map(move |c| (s, c, 1.0)))
        .collect();

    // (full table, circle-only table, forced circles) per archetype
    type Resolved = (CellSampler, Option<CellSampler>, usize);
    let resolve =
        |weights: &[(Shape, Color, f64)], min_circles: usize, name: &str| -> Result<Resolved> {
            let full = CellSampler::new(weights.iter().copied(), value_map).ok_or_else(|| {
                Error::Config(format!(
                    "archetype `{name}` has no cell allowed by the value map"
                ))
            })?;
            let circles = CellSampler::new(
                weights
                    .iter()
                    .copied()
                    .filter(|(s, _, _)| *s == Shape::Circle),
                value_map,
            );
            if min_circles > 0 && circles.is_none() {
                return Err(Error::Config(format!(
                    "archetype `{name}` requires circles but has no mapped circle cell"
                )));
            }
            Ok((full, circles, min_circles))
        };

    let archetypes: Vec<Resolved> = match config {
        GeneratorConfig::Themed { archetypes } => archetypes
            .iter()
            .map(|a| {
                let w: Vec<_> = a
                    .weights
                    .iter()
                    .map(|w| (w.shape, w.color, w.weight))
                    .collect();
                resolve(&w, a.min_circles, &a.name)
            })
            .collect::<Result<_>>()?,
        GeneratorConfig::Uniform => (0..NUM_CLUSTERS)
            .map(|_| resolve(&uniform_cells, 0, "uniform"))
            .collect::<Result<_>>()?,
    };

    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let mut order: Vec<usize> = (0..NUM_CLUSTERS).collect();
        if matches!(config, GeneratorConfig::Themed { .. }) {
            order.shuffle(&mut rng);
        }
        let mut objects = Vec::with_capacity(OBJECTS_PER_BOARD);
        for (cluster, &arch_idx) in order.iter().enumerate() {
            let (full, circles, min_circles) = &archetypes[arch_idx];
            let mut cells: Vec<(Shape, Color)> = (0..OBJECTS_PER_CLUSTER)
                .map(|k| match circles {
                    Some(c) if k < *min_circles => c.sample(&mut rng),
                    _ => full.sample(&mut rng),
                })
                .collect();
            cells.shuffle(&mut rng);

            let (cr, cc) = CLUSTER_CENTERS[cluster];
            let offsets = rand::seq::index::sample(&mut rng, 25, OBJECTS_PER_CLUSTER);
            for (k, ((shape, color), off)) in cells.into_iter().zip(offsets.iter()).enumerate() {
                let iv = value_map
                    .interval(shape, color)
                    .expect("sampler only yields mapped cells");
                let value = rng.gen_range(iv.lo..=iv.hi);
                let row = (cr as i32 + (off / 5) as i32 - 2) as u8;
                let col = (cc as i32 + (off % 5) as i32 - 2) as u8;
                objects.push(GameObject {
                    id: (cluster * OBJECTS_PER_CLUSTER + k) as u32,
                    shape,
                    color,
                    value,
                    cluster_id: cluster as u8,
                    position: Some((row, col)),
                });
            }
        }
        if objects.iter().any(|o| o.value > 0) {
            return Ok(TrialBoard {
                trial_index,
                objects,
            });
        }
    }
    Err(Error::Config(
        "generator could not produce a board with a positive object".into(),
    ))
}

// ---------------------------------------------------------------------------
// Observation masks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewMask {
    Learner,
    TeacherFull,
    TeacherPartial,
    SoloFull,
    SoloPartial,
}

impl ViewMask {
    pub fn sees_values(self) -> bool {
        matches!(
            self,
            ViewMask::TeacherFull | ViewMask::TeacherPartial | ViewMask::SoloFull
        )
    }

    pub fn sees_features(self) -> bool {
        matches!(
            self,
            ViewMask::Learner | ViewMask::TeacherFull | ViewMask::SoloPartial
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectView {
    pub id: u32,
    pub cluster: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<(u8, u8)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Color>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardView {
    pub trial_index: u32,
    pub mask: ViewMask,
    pub objects: Vec<ObjectView>,
}

pub fn mask_board(board: &TrialBoard, mask: ViewMask) -> BoardView {
    let features = mask.sees_features();
    let values = mask.sees_values();
    BoardView {
        trial_index: board.trial_index,
        mask,
        objects: board
            .objects
            .iter()
            .map(|o| ObjectView {
                id: o.id,
                cluster: o.cluster_id,
                pos: o.position,
                shape: features.then_some(o.shape),
                color: features.then_some(o.color),
                value: values.then_some(o.value),
            })
            .collect(),
    }
}
