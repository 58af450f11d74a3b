//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use teachsim::agents::{optimal_choice, run_condition_batch, Communication, Condition, SimConfig};
use teachsim::analysis::{
    canonical_weights, chi_square_sf, fit_window_utilities, ols_fit, t_two_sided_p, Design,
};
use teachsim::choicemodel::{
    cluster_choice_probabilities, fit_map, object_pick_probability, sample_choice,
    trial_log_likelihood, ChoiceDataset, ChoiceRecord, PriorConfig, Trial, UtilityWeights,
};
use teachsim::env::{
    color_feature, conjunction_feature, generate_trial, score_choice, shape_feature, Color,
    GeneratorConfig, Shape, TrialBoard, ValueMap, MAX_ABS_VALUE, NUM_CLUSTERS, NUM_FEATURES,
    OBJECTS_PER_CLUSTER,
};
use teachsim::optimize::{minimize_powell, OptimizerConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(
        elapsed.as_secs_f64() < limit_s,
        format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()),
    )
}

fn choice(board: &TrialBoard, cluster: usize, mask: u32) -> ChoiceRecord {
    ChoiceRecord {
        trial_index: board.trial_index,
        chosen_cluster: cluster as u8,
        picks: board
            .cluster(cluster)
            .enumerate()
            .map(|(k, o)| (o.id, mask >> k & 1 == 1))
            .collect(),
    }
}

fn all_outcomes(board: &TrialBoard) -> impl Iterator<Item = ChoiceRecord> + '_ {
    (0..NUM_CLUSTERS)
        .flat_map(move |c| (0..1u32 << OBJECTS_PER_CLUSTER).map(move |m| choice(board, c, m)))
}

fn c1_normalization() -> Outcome {
    let start = Instant::now();
    let map = ValueMap::default();
    let gen = GeneratorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let board = generate_trial(rng.gen(), i as u32, &map, &gen).map_err(|e| e.to_string())?;
        let theta: Vec<f64> = (0..NUM_FEATURES)
            .map(|_| rng.gen_range(-5.0..5.0))
            .collect();
        let theta = UtilityWeights::from_slice(&theta).map_err(|e| e.to_string())?;
        let mut total = 0.0;
        let mut n = 0;
        for c in all_outcomes(&board) {
            total += trial_log_likelihood(&theta, &board, &c)
                .map_err(|e| e.to_string())?
                .exp();
            n += 1;
        }
        check(n == 128, format!("{n} outcomes"))?;
        worst = worst.max((total - 1.0).abs());
    }
    check(worst < 1e-9, format!("max |sum - 1| = {worst:e}"))?;
    within(start.elapsed(), 5.0)?;
    Ok(format!(
        "max |sum - 1| = {worst:.1e} over 100 pairs, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

fn c2_degenerate() -> Outcome {
    let theta = UtilityWeights::zeros();
    let expected = 0.25f64.ln() + 5.0 * 0.5f64.ln();
    let mut worst: f64 = 0.0;
    for s in 0..20u64 {
        let board = generate_trial(s, 0, &ValueMap::default(), &GeneratorConfig::default())
            .map_err(|e| e.to_string())?;
        check(
            cluster_choice_probabilities(&theta, &board) == [0.25; 4],
            "cluster probabilities not exactly 0.25",
        )?;
        check(
            board
                .objects
                .iter()
                .all(|o| object_pick_probability(&theta, o) == 0.5),
            "pick probabilities not exactly 0.5",
        )?;
        for c in all_outcomes(&board).step_by(7) {
            let ll = trial_log_likelihood(&theta, &board, &c).map_err(|e| e.to_string())?;
            worst = worst.max((ll - expected).abs());
        }
    }
    check(worst < 1e-12, format!("log-likelihood off by {worst:e}"))?;
    Ok(format!(
        "probabilities exact, log-likelihood within {worst:.1e} of log(1/4)+5log(1/2)"
    ))
}

fn c3_optimizer() -> Outcome {
    let start = Instant::now();
    let cfg = OptimizerConfig::default();
    let mut parts = Vec::new();

    let quad = |x: &[f64]| {
        (x[0] - 1.0).powi(2)
            + 10.0 * (x[1] + 2.0).powi(2)
            + 0.5 * (x[2] - 3.0).powi(2)
            + x[0] * x[2] * 0.2
    };
    // minimum of the coupled quadratic, solved by hand
    let det = 2.0 * 1.0 - 0.2 * 0.2;
    let q_star = [
        (2.0 * 1.0 - 0.2 * 3.0) / det,
        -2.0,
        (2.0 * 3.0 - 0.2 * 2.0) / det,
    ];
    let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let rosen = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
    let l1 = |x: &[f64]| x.iter().map(|v| v.abs()).sum::<f64>();

    let r = minimize_powell(sphere, &[3.0, -4.0, 1.5, 0.5], &cfg).map_err(|e| e.to_string())?;
    let err = r.x_star.iter().map(|v| v.abs()).fold(0.0, f64::max);
    check(
        err < 1e-6 && r.evaluations < 10_000,
        format!("sphere err {err:e}, {} evals", r.evaluations),
    )?;
    parts.push(format!("sphere {err:.0e}/{}", r.evaluations));

    let r = minimize_powell(quad, &[0.0, 0.0, 0.0], &cfg).map_err(|e| e.to_string())?;
    let err = r
        .x_star
        .iter()
        .zip(q_star)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check(
        err < 1e-6 && r.evaluations < 10_000,
        format!("quadratic err {err:e}, {} evals", r.evaluations),
    )?;
    parts.push(format!("quadratic {err:.0e}/{}", r.evaluations));

    let r = minimize_powell(rosen, &[-1.2, 1.0], &cfg).map_err(|e| e.to_string())?;
    let err = r.x_star.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    check(
        err < 1e-4 && r.evaluations < 10_000,
        format!("rosenbrock err {err:e}, {} evals", r.evaluations),
    )?;
    parts.push(format!("rosenbrock {err:.0e}/{}", r.evaluations));

    let r = minimize_powell(l1, &[1.3, -0.7, 2.1, -1.9, 0.4], &cfg).map_err(|e| e.to_string())?;
    let err = r.x_star.iter().map(|v| v.abs()).fold(0.0, f64::max);
    check(
        err < 1e-3 && r.evaluations < 10_000,
        format!("l1 err {err:e}, {} evals", r.evaluations),
    )?;
    parts.push(format!("l1 {err:.0e}/{}", r.evaluations));

    within(start.elapsed(), 2.0)?;
    Ok(format!(
        "{} (err/evals), {:.2}s",
        parts.join(", "),
        start.elapsed().as_secs_f64()
    ))
}

fn sparse_truth() -> UtilityWeights {
    let mut t = [0.0; NUM_FEATURES];
    t[shape_feature(Shape::Circle)] = 1.5;
    t[color_feature(Color::Yellow)] = -1.5;
    t[conjunction_feature(Color::White, Shape::Triangle)] = 1.0;
    UtilityWeights::new(t).unwrap()
}

fn simulate_dataset(theta: &UtilityWeights, t: usize, seed: u64) -> ChoiceDataset {
    let map = ValueMap::default();
    let gen = GeneratorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trials = (0..t)
        .map(|i| {
            let board = generate_trial(seed, i as u32, &map, &gen).unwrap();
            let choice = sample_choice(theta, &board, &mut rng);
            Trial { board, choice }
        })
        .collect();
    ChoiceDataset::new(trials).unwrap()
}

fn c4_map_recovery() -> Outcome {
    let start = Instant::now();
    let truth = sparse_truth();
    let prior = PriorConfig::default();
    let cfg = OptimizerConfig::default();

    let fit =
        fit_map(&simulate_dataset(&truth, 500, 7), &prior, &cfg).map_err(|e| e.to_string())?;
    let mut zeros = 0;
    let mut small = 0;
    for i in 0..NUM_FEATURES {
        let (est, tru) = (fit.theta.get(i), truth.get(i));
        if tru == 0.0 {
            zeros += 1;
            if est.abs() < 0.2 {
                small += 1;
            }
        } else {
            check(
                est.signum() == tru.signum(),
                format!("feature {i}: estimate {est:.3}, truth {tru}"),
            )?;
        }
    }
    let frac = small as f64 / zeros as f64;
    check(
        frac >= 0.8,
        format!("only {small}/{zeros} true zeros below 0.2"),
    )?;

    let reps = 5;
    let mut medians = Vec::new();
    for t in [50, 500, 5000] {
        let mut errs: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let data = simulate_dataset(&truth, t, 1000 + r as u64);
                fit_map(&data, &prior, &cfg).map(|f| f.theta.l2_distance(&truth))
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        errs.sort_by(f64::total_cmp);
        medians.push(errs[reps / 2]);
    }
    check(
        medians[0] > medians[1] && medians[1] > medians[2],
        format!("median errors not decreasing: {medians:?}"),
    )?;
    within(start.elapsed(), 120.0)?;
    Ok(format!(
        "signs ok, {small}/{zeros} zeros below 0.2, median L2 err {:.3} > {:.3} > {:.3}, {:.1}s",
        medians[0],
        medians[1],
        medians[2],
        start.elapsed().as_secs_f64()
    ))
}

fn c5_lambda_law() -> Outcome {
    let data = simulate_dataset(&sparse_truth(), 300, 55);
    let cfg = OptimizerConfig::default();
    let mut norms = Vec::new();
    for lambda in [0.1, 1.0, 10.0, 100.0] {
        let f =
            fit_map(&data, &PriorConfig::new(lambda).unwrap(), &cfg).map_err(|e| e.to_string())?;
        norms.push(f.theta.l1_norm());
    }
    check(
        norms.windows(2).all(|w| w[1] <= w[0] + 1e-9),
        format!("L1 norms not non-increasing: {norms:?}"),
    )?;
    Ok(format!(
        "||theta||_1 = {}",
        norms
            .iter()
            .map(|n| format!("{n:.4}"))
            .collect::<Vec<_>>()
            .join(" >= ")
    ))
}

fn c6_environment() -> Outcome {
    let start = Instant::now();
    let gen = GeneratorConfig::default();
    let maps = [ValueMap::build(false), ValueMap::build(true)];
    for map in &maps {
        check(
            map.counterbalance_swap().counterbalance_swap() == *map,
            "map swap is not an involution",
        )?;
    }
    for s in 0..10_000u64 {
        let map = &maps[(s % 2) as usize];
        let b = generate_trial(s.wrapping_mul(0x9E37), (s % 10) as u32, map, &gen)
            .map_err(|e| e.to_string())?;
        check(
            b.objects.len() == 20,
            format!("seed {s}: {} objects", b.objects.len()),
        )?;
        for c in 0..NUM_CLUSTERS {
            check(
                b.cluster(c).count() == 5,
                format!("seed {s}: cluster {c} size"),
            )?;
        }
        for o in &b.objects {
            check(
                o.value.abs() <= MAX_ABS_VALUE,
                format!("seed {s}: value {} out of range", o.value),
            )?;
            let law = match o.shape {
                Shape::Circle => o.value > 0,
                Shape::Square => o.value < 0,
                Shape::Triangle => o.value == 0,
            };
            check(
                law,
                format!("seed {s}: {:?} {:?} worth {}", o.color, o.shape, o.value),
            )?;
            let iv = map
                .interval(o.shape, o.color)
                .ok_or("object from an unmapped cell")?;
            check(
                iv.contains(o.value),
                format!("seed {s}: value outside its cell"),
            )?;
        }
        check(
            b.recolored().recolored() == b,
            format!("seed {s}: recolor is not an involution"),
        )?;
        b.validate().map_err(|e| e.to_string())?;
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!(
        "10^4 boards valid, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

fn c7_optimal_policy() -> Outcome {
    let gen = GeneratorConfig::default();
    for s in 0..1000u64 {
        let map = ValueMap::build(s % 2 == 1);
        let b = generate_trial(s + 50_000, 0, &map, &gen).map_err(|e| e.to_string())?;
        let brute = all_outcomes(&b)
            .map(|c| score_choice(&b, &c).unwrap())
            .max()
            .unwrap();
        let opt = score_choice(&b, &optimal_choice(&b)).map_err(|e| e.to_string())?;
        check(
            opt == brute,
            format!("seed {s}: optimal {opt}, brute force {brute}"),
        )?;
    }
    Ok("optimal_choice equals the 128-outcome maximum on 10^3 boards".into())
}

/// Normal equations solved by Gaussian elimination with partial pivoting.
fn normal_equation_solve(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let k = x.ncols();
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = (0..x.nrows()).map(|r| x[(r, i)] * x[(r, j)]).sum();
        }
        a[i][k] = (0..x.nrows()).map(|r| x[(r, i)] * y[r]).sum();
    }
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for row in col + 1..k {
            let f = a[row][col] / a[col][col];
            let pivot = a[col].clone();
            for (dst, p) in a[row].iter_mut().zip(&pivot).skip(col) {
                *dst -= f * p;
            }
        }
    }
    let mut b = vec![0.0; k];
    for i in (0..k).rev() {
        b[i] = (a[i][k] - (i + 1..k).map(|j| a[i][j] * b[j]).sum::<f64>()) / a[i][i];
    }
    b
}

fn c8_statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (n, k) = (rng.gen_range(10..40), rng.gen_range(2..6));
        let x = DMatrix::from_fn(n, k, |_, j| {
            if j == 0 {
                1.0
            } else {
                rng.gen_range(-3.0..3.0)
            }
        });
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let names = (0..k).map(|j| format!("x{j}")).collect();
        let fit =
            ols_fit(&Design::new(names, x.clone()).unwrap(), &y).map_err(|e| e.to_string())?;
        for (a, b) in fit.coefficients.iter().zip(normal_equation_solve(&x, &y)) {
            worst = worst.max((a - b).abs());
        }
    }
    check(
        worst < 1e-8,
        format!("OLS differs from normal equations by {worst:e}"),
    )?;
    let chi = chi_square_sf(5.65, 3.0).map_err(|e| e.to_string())?;
    check((chi - 0.13).abs() <= 0.005, format!("chi-square p = {chi}"))?;
    let t = t_two_sided_p(2.228, 10.0).map_err(|e| e.to_string())?;
    check((t - 0.05).abs() <= 1e-3, format!("t p = {t}"))?;
    Ok(format!(
        "OLS max diff {worst:.1e}, chi2(3)=5.65 p={chi:.4}, t(10)=2.228 p={t:.4}"
    ))
}

struct Batch {
    means: BTreeMap<Condition, f64>,
    coefs: BTreeMap<Condition, [f64; 3]>,
    elapsed: Duration,
}

fn run_batch() -> Result<Batch, String> {
    let start = Instant::now();
    let cfg = SimConfig::default();
    let prior = PriorConfig::default();
    let opt = OptimizerConfig::default();
    let cols = [
        color_feature(Color::Pink),
        shape_feature(Shape::Circle),
        conjunction_feature(Color::Pink, Shape::Circle),
    ];
    let mut means = BTreeMap::new();
    let mut coefs = BTreeMap::new();
    for cond in Condition::ALL {
        let run = run_condition_batch(cond, 200, 0, &cfg).map_err(|e| e.to_string())?;
        means.insert(cond, run.summary.mean);
        if cond.is_solo() {
            continue;
        }
        let thetas: Vec<UtilityWeights> = run
            .logs
            .par_iter()
            .map(|l| {
                fit_window_utilities(l, 3, &prior, &opt).map(|e| canonical_weights(l, &e.theta))
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let mut agg = [0.0; 3];
        for t in &thetas {
            for (a, i) in agg.iter_mut().zip(cols) {
                *a += t.get(i) / thetas.len() as f64;
            }
        }
        coefs.insert(cond, agg);
    }
    Ok(Batch {
        means,
        coefs,
        elapsed: start.elapsed(),
    })
}

fn c9_ordering(batch: &Result<Batch, String>) -> Outcome {
    let b = batch.as_ref().map_err(Clone::clone)?;
    let m = |c: Condition| b.means[&c];
    let sf = m(Condition::SOLO_FULL);
    for c in &Condition::ALL[1..] {
        check(sf > m(*c), format!("Solo-Full {sf:.2} <= {c} {:.2}", m(*c)))?;
    }
    let sp = m(Condition::SOLO_PARTIAL);
    for c in [
        Condition::DEMO_FULL,
        Condition::DEMO_PARTIAL,
        Condition::CHAT_FULL,
    ] {
        check(
            sp < m(c),
            format!("Solo-Partial {sp:.2} >= {c} {:.2}", m(c)),
        )?;
    }
    let chat_gap = m(Condition::CHAT_FULL) - m(Condition::CHAT_PARTIAL);
    let demo_gap = m(Condition::DEMO_FULL) - m(Condition::DEMO_PARTIAL);
    check(
        chat_gap > demo_gap,
        format!("CF-CP {chat_gap:.2} <= DF-DP {demo_gap:.2}"),
    )?;
    within(b.elapsed, 300.0)?;
    let listing: Vec<String> = Condition::ALL
        .iter()
        .map(|c| format!("{c} {:.1}", m(*c)))
        .collect();
    Ok(format!(
        "{}; CF-CP {chat_gap:.2} > DF-DP {demo_gap:.2}; batch {:.1}s",
        listing.join(", "),
        b.elapsed.as_secs_f64()
    ))
}

fn c10_coefficient_pattern(batch: &Result<Batch, String>) -> Outcome {
    let b = batch.as_ref().map_err(Clone::clone)?;
    let pc = |c: Condition| b.coefs[&c][2];
    let best = Condition::MULTIPLAYER
        .into_iter()
        .max_by(|x, y| pc(*x).total_cmp(&pc(*y)))
        .unwrap();
    check(
        best == Condition::CHAT_FULL,
        format!("highest pink_circle is {best} ({:.3})", pc(best)),
    )?;
    let circle_mean = |comm: Communication| {
        let v: Vec<f64> = Condition::MULTIPLAYER
            .into_iter()
            .filter(|c| c.communication == comm)
            .map(|c| b.coefs[&c][1])
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (demo, chat) = (
        circle_mean(Communication::Demo),
        circle_mean(Communication::Chat),
    );
    check(
        demo > chat,
        format!("circle: Demo {demo:.3} <= Chat {chat:.3}"),
    )?;
    Ok(format!(
        "pink_circle DF {:.3} DP {:.3} CF {:.3} CP {:.3}; circle Demo {demo:.3} > Chat {chat:.3}",
        pc(Condition::DEMO_FULL),
        pc(Condition::DEMO_PARTIAL),
        pc(Condition::CHAT_FULL),
        pc(Condition::CHAT_PARTIAL)
    ))
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    files
}

fn c11_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path().join("run");
    let mut snaps = Vec::new();
    for _ in 0..2 {
        if out.exists() {
            std::fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
        }
        let o = Command::new(env!("CARGO_BIN_EXE_teachsim"))
            .args([
                "report",
                "--seed",
                "2024",
                "--dyads",
                "8",
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .map_err(|e| e.to_string())?;
        check(
            o.status.success(),
            String::from_utf8_lossy(&o.stderr).into_owned(),
        )?;
        snaps.push(snapshot(&out));
    }
    check(
        snaps[0].len() > 20,
        format!("only {} files written", snaps[0].len()),
    )?;
    for (path, bytes) in &snaps[0] {
        check(
            snaps[1].get(path) == Some(bytes),
            format!("{} differs", path.display()),
        )?;
    }
    check(snaps[0].len() == snaps[1].len(), "file sets differ")?;
    Ok(format!(
        "{} files byte-identical across two report runs",
        snaps[0].len()
    ))
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let res = catch_unwind(AssertUnwindSafe(&mut *f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match res {
            Ok(msg) => println!("[PASS] criterion {n:>2} {name}: {msg}"),
            Err(msg) => {
                failures += 1;
                println!("[FAIL] criterion {n:>2} {name}: {msg}");
            }
        }
    };
    report(1, "likelihood normalization", &mut c1_normalization);
    report(2, "degenerate model", &mut c2_degenerate);
    report(3, "optimizer suite", &mut c3_optimizer);
    report(4, "MAP recovery", &mut c4_map_recovery);
    report(5, "sparsity vs lambda", &mut c5_lambda_law);
    report(6, "environment invariants", &mut c6_environment);
    report(7, "optimal-policy oracle", &mut c7_optimal_policy);
    report(8, "statistics oracles", &mut c8_statistics);
    let batch = catch_unwind(run_batch).unwrap_or_else(|_| Err("batch panicked".into()));
    report(9, "condition ordering", &mut || c9_ordering(&batch));
    report(10, "fitted coefficient pattern", &mut || {
        c10_coefficient_pattern(&batch)
    });
    report(11, "end-to-end determinism", &mut c11_determinism);
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 11 acceptance criteria passed");
}
