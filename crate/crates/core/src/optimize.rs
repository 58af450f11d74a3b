//! Powell's conjugate direction method.
//!
//! Each iteration line-minimizes along every direction of the current set,
//! then (when the classic acceptance test passes) replaces the direction of
//! largest single decrease with the normalized net displacement of the sweep.
//! Line searches bracket outward by the golden ratio and refine by golden
//! section, so no derivatives are needed and the L1 kink in the MAP objective
//! is handled.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GOLDEN: f64 = 1.618_033_988_749_895;
const INV_GOLDEN: f64 = 0.618_033_988_749_895;
const TINY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Golden-section stopping width, scaled by `1 + |t|`.
    pub x_tolerance: f64,
    /// Relative decrease per iteration below which a sweep counts as converged.
    pub f_tolerance: f64,
    /// Maximum direction-set sweeps, summed over direction resets.
    pub max_iterations: usize,
    /// Maximum objective evaluations in one line search.
    pub max_line_evals: usize,
    /// Hard cap on objective evaluations for one run.
    pub max_evaluations: usize,
    /// Number of random starts added to the origin in MAP fits.
    pub restart_count: usize,
    /// After convergence the direction set is reset to the coordinate axes and
    /// the search resumed, at most this many times.
    pub direction_resets: usize,
    /// Largest trial step of a line search. Later searches along the same
    /// direction start from twice the previous step.
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            x_tolerance: 1e-8,
            f_tolerance: 1e-10,
            max_iterations: 500,
            max_line_evals: 200,
            max_evaluations: 200_000,
            restart_count: 4,
            direction_resets: 2,
            initial_step: 1.0,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_tolerance > 0.0) || !(self.f_tolerance > 0.0) {
            return Err(Error::Config(
                "optimizer tolerances must be positive".into(),
            ));
        }
        if self.max_iterations == 0 || self.max_line_evals < 3 || self.max_evaluations == 0 {
            return Err(Error::Config(
                "optimizer budgets must be at least 1 (line evals at least 3)".into(),
            ));
        }
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return Err(Error::Config("initial_step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub direction_resets: usize,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

/// Evaluation counter; non-finite values are reported as `+inf` so that
/// searches back away from them.
struct Objective<F> {
    f: F,
    evals: Cell<usize>,
    limit: usize,
}

impl<F: Fn(&[f64]) -> f64> Objective<F> {
    fn eval(&self, x: &[f64]) -> f64 {
        self.evals.set(self.evals.get() + 1);
        let v = (self.f)(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    fn exhausted(&self) -> bool {
        self.evals.get() >= self.limit
    }
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Minimizes `t -> f(point + t * direction)`; returns `(step, f_value)` with
/// `f_value <= f(point)`. A failed bracket returns step 0.
pub fn line_minimize<F>(
    f: F,
    point: &[f64],
    direction: &[f64],
    config: &OptimizerConfig,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    if norm(direction) == 0.0 {
        return Err(Error::InvalidInput("line search direction is zero".into()));
    }
    let obj = Objective {
        f,
        evals: Cell::new(0),
        limit: usize::MAX,
    };
    let f0 = obj.eval(point);
    if !f0.is_finite() {
        return Err(Error::Domain(
            "objective is not finite at the line search origin".into(),
        ));
    }
    Ok(line_search(
        &obj,
        point,
        direction,
        f0,
        config.initial_step,
        config,
    ))
}

fn line_search<F>(
    obj: &Objective<F>,
    point: &[f64],
    dir: &[f64],
    f0: f64,
    h: f64,
    config: &OptimizerConfig,
) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut used = 0usize;
    let budget = config.max_line_evals;
    let mut phi = |t: f64| -> Option<f64> {
        if used >= budget || obj.exhausted() {
            return None;
        }
        used += 1;
        Some(obj.eval(&axpy(point, t, dir)))
    };

    // Bracket: find a < b < c (or reversed) with f(b) <= f(a), f(b) < f(c).
    let mut a = 0.0;
    let Some(fh) = phi(h) else { return (0.0, f0) };
    let (mut b, mut fb);
    if fh < f0 {
        b = h;
        fb = fh;
    } else {
        let Some(fm) = phi(-h) else { return (0.0, f0) };
        if fm < f0 {
            b = -h;
            fb = fm;
        } else {
            // Origin is already bracketed by +-h.
            return match golden_section(&mut phi, -h, 0.0, h, f0, config.x_tolerance) {
                Some((t, ft)) if ft < f0 => (t, ft),
                _ => (0.0, f0),
            };
        }
    }
    let mut c = b + GOLDEN * (b - a);
    let Some(mut fc) = phi(c) else {
        return (0.0, f0);
    };
    while fc <= fb {
        a = b;
        b = c;
        fb = fc;
        c = b + GOLDEN * (b - a);
        match phi(c) {
            Some(v) => fc = v,
            None => return (0.0, f0),
        }
    }
    match golden_section(&mut phi, a, b, c, fb, config.x_tolerance) {
        Some((t, ft)) if ft < f0 => (t, ft),
        Some(_) => (0.0, f0),
        // Budget ran out during refinement: the bracket midpoint is still an
        // improvement.
        None if fb < f0 => (b, fb),
        None => (0.0, f0),
    }
}

/// Golden-section search on the bracket `(a, b, c)` with known `f(b)`.
/// Returns `None` only if the evaluation budget ran out.
fn golden_section(
    phi: &mut impl FnMut(f64) -> Option<f64>,
    a: f64,
    b: f64,
    c: f64,
    fb: f64,
    tol: f64,
) -> Option<(f64, f64)> {
    let (mut x0, mut x3) = if a < c { (a, c) } else { (c, a) };
    let (mut x1, mut x2, mut f1, mut f2);
    if (x3 - b).abs() > (b - x0).abs() {
        x1 = b;
        f1 = fb;
        x2 = b + (1.0 - INV_GOLDEN) * (x3 - b);
        f2 = phi(x2)?;
    } else {
        x2 = b;
        f2 = fb;
        x1 = b - (1.0 - INV_GOLDEN) * (b - x0);
        f1 = phi(x1)?;
    }
    while (x3 - x0).abs() > tol * (1.0 + x1.abs() + x2.abs()) {
        if f2 < f1 {
            let nx = INV_GOLDEN * x2 + (1.0 - INV_GOLDEN) * x3;
            let Some(nf) = phi(nx) else { break };
            (x0, x1, f1, x2, f2) = (x1, x2, f2, nx, nf);
        } else {
            let nx = INV_GOLDEN * x1 + (1.0 - INV_GOLDEN) * x0;
            let Some(nf) = phi(nx) else { break };
            (x3, x2, f2, x1, f1) = (x2, x1, f1, nx, nf);
        }
    }
    Some(if f1 < f2 { (x1, f1) } else { (x2, f2) })
}

fn converged(f_prev: f64, f_new: f64, ftol: f64) -> bool {
    2.0 * (f_prev - f_new).abs() <= ftol * (f_prev.abs() + f_new.abs() + TINY)
}

/// Bracket width for the next search along a direction, from the last step.
fn next_scale(prev: f64, step: f64, config: &OptimizerConfig) -> f64 {
    let floor = (1e3 * config.x_tolerance).min(config.initial_step);
    let s = if step == 0.0 {
        prev * 0.5
    } else {
        2.0 * step.abs()
    };
    s.clamp(floor, config.initial_step)
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect()
}

pub fn minimize_powell<F>(f: F, x0: &[f64], config: &OptimizerConfig) -> Result<OptimizationResult>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidInput(
            "cannot minimize over zero dimensions".into(),
        ));
    }
    let obj = Objective {
        f,
        evals: Cell::new(0),
        limit: config.max_evaluations,
    };
    let mut x = x0.to_vec();
    let mut fx = obj.eval(&x);
    if !fx.is_finite() {
        return Err(Error::Domain(
            "objective is not finite at the starting point".into(),
        ));
    }

    let mut iterations = 0;
    let mut resets = 0;
    let mut history = Vec::new();
    let mut is_converged = false;

    'outer: loop {
        let f_round_start = fx;
        let mut dirs = identity(n);
        let mut scales = vec![config.initial_step; n];
        let mut round_converged = false;
        while iterations < config.max_iterations && !obj.exhausted() {
            iterations += 1;
            let f_start = fx;
            let x_start = x.clone();
            let mut biggest = 0.0;
            let mut biggest_idx = 0;
            for (i, d) in dirs.iter().enumerate() {
                let f_before = fx;
                let (t, ft) = line_search(&obj, &x, d, fx, scales[i], config);
                scales[i] = next_scale(scales[i], t, config);
                if t != 0.0 {
                    x = axpy(&x, t, d);
                    fx = ft;
                }
                if f_before - fx > biggest {
                    biggest = f_before - fx;
                    biggest_idx = i;
                }
            }
            history.push(fx);
            if converged(f_start, fx, config.f_tolerance) {
                round_converged = true;
                break;
            }
            if obj.exhausted() {
                break;
            }

            let disp: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
            let disp_norm = norm(&disp);
            if disp_norm == 0.0 {
                continue;
            }
            let extrapolated: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| 2.0 * a - b).collect();
            let f_ext = obj.eval(&extrapolated);
            if f_ext < f_start {
                let t = 2.0 * (f_start - 2.0 * fx + f_ext) * (f_start - fx - biggest).powi(2)
                    - biggest * (f_start - f_ext).powi(2);
                if t < 0.0 {
                    let new_dir: Vec<f64> = disp.iter().map(|v| v / disp_norm).collect();
                    let h = next_scale(config.initial_step, disp_norm, config);
                    let (step, fs) = line_search(&obj, &x, &new_dir, fx, h, config);
                    if step != 0.0 {
                        x = axpy(&x, step, &new_dir);
                        fx = fs;
                    }
                    dirs[biggest_idx] = dirs[n - 1].clone();
                    scales[biggest_idx] = scales[n - 1];
                    dirs[n - 1] = new_dir;
                    scales[n - 1] = next_scale(h, step, config);
                }
            }
            if let Some(last) = history.last_mut() {
                *last = fx;
            }
        }

        if !round_converged {
            break 'outer;
        }
        is_converged = true;
        // A fresh axis set from the converged point; stop once a full round
        // no longer improves.
        if resets >= config.direction_resets
            || (resets > 0 && converged(f_round_start, fx, config.f_tolerance))
        {
            break 'outer;
        }
        resets += 1;
    }

    Ok(OptimizationResult {
        f_star: fx,
        x_star: x,
        iterations,
        evaluations: obj.evals.get(),
        converged: is_converged,
        direction_resets: resets,
        history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartResult {
    pub best: OptimizationResult,
    pub best_index: usize,
    /// Final value per start; `None` when that start failed.
    pub per_start: Vec<Option<f64>>,
}

/// Runs Powell from each start and keeps the lowest `f_star`; ties go to the
/// lowest start index. A start that fails is skipped.
pub fn multi_start<F>(
    f: F,
    starts: &[Vec<f64>],
    config: &OptimizerConfig,
) -> Result<MultiStartResult>
where
    F: Fn(&[f64]) -> f64,
{
    if starts.is_empty() {
        return Err(Error::InvalidInput(
            "multi_start needs at least one start".into(),
        ));
    }
    let mut best: Option<(usize, OptimizationResult)> = None;
    let mut per_start = Vec::with_capacity(starts.len());
    let mut last_err = None;
    for (i, x0) in starts.iter().enumerate() {
        match minimize_powell(&f, x0, config) {
            Ok(r) => {
                per_start.push(Some(r.f_star));
                if best.as_ref().is_none_or(|(_, b)| r.f_star < b.f_star) {
                    best = Some((i, r));
                }
            }
            Err(e) => {
                log::warn!("start {i} failed: {e}");
                per_start.push(None);
                last_err = Some(e);
            }
        }
    }
    match best {
        Some((best_index, best)) => Ok(MultiStartResult {
            best,
            best_index,
            per_start,
        }),
        None => Err(last_err.expect("at least one start ran")),
    }
}
