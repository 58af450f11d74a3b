//! Prints per-condition mean final scores and mean window-fitted weights.
//!
//! Usage: cargo run --release --example sweep -- [dyads] [seed] [window]

use teachsim::agents::{run_condition_batch, Condition, SimConfig};
use teachsim::analysis::{canonical_weights, fit_window_utilities};
use teachsim::choicemodel::PriorConfig;
use teachsim::env::{color_feature, conjunction_feature, shape_feature, Color, Shape};
use teachsim::optimize::OptimizerConfig;

fn main() -> teachsim::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let dyads = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let window = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let config: SimConfig = match std::env::var("SWEEP_CONFIG") {
        Ok(json) => serde_json::from_str(&json)?,
        Err(_) => SimConfig::default(),
    };
    let prior = PriorConfig::default();
    let opt = OptimizerConfig::default();
    let cols = [
        ("pink", color_feature(Color::Pink)),
        ("circle", shape_feature(Shape::Circle)),
        (
            "pink_circle",
            conjunction_feature(Color::Pink, Shape::Circle),
        ),
    ];
    println!("condition,mean,sd,pink,circle,pink_circle");
    for cond in Condition::ALL {
        let run = run_condition_batch(cond, dyads, seed, &config)?;
        let mut sums = [0.0; 3];
        for log in &run.logs {
            let est = fit_window_utilities(log, window, &prior, &opt)?;
            let theta = canonical_weights(log, &est.theta);
            for (s, (_, i)) in sums.iter_mut().zip(cols) {
                *s += theta.get(i);
            }
        }
        let n = run.logs.len() as f64;
        println!(
            "{},{:.2},{:.2},{:.4},{:.4},{:.4}",
            cond,
            run.summary.mean,
            run.summary.sd,
            sums[0] / n,
            sums[1] / n,
            sums[2] / n
        );
    }
    Ok(())
}
