//! `teachsim`: generate boards, simulate dyads, fit utilities, analyze.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use teachsim::agents::Condition;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "teachsim",
    version,
    about = "Teaching-game simulator and utility estimator"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated condition names, or `all`.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    conditions: Option<Vec<String>>,
    /// Dyads per condition.
    #[arg(long, global = true, value_name = "N")]
    dyads: Option<usize>,
    /// Trailing trials used for utility fits.
    #[arg(long, global = true, value_name = "K")]
    window: Option<usize>,
    /// Laplace prior rate.
    #[arg(long, global = true, value_name = "X")]
    lambda: Option<f64>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write generated boards as JSON.
    Generate {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Run condition batches; write logs, summary.csv and corpus.jsonl.
    Simulate,
    /// Fit utilities over the last K trials of each log.
    Fit {
        /// Directory of episode logs (default: OUT/logs).
        #[arg(long, value_name = "DIR")]
        logs: Option<PathBuf>,
        /// Fit a single choice dataset (JSON lines with inline boards) instead.
        #[arg(long, value_name = "PATH", conflicts_with = "logs")]
        dataset: Option<PathBuf>,
    },
    /// Regression, t-tests and chat-corpus tables.
    Analyze {
        #[arg(long, value_name = "PATH")]
        summary: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        corpus: Option<PathBuf>,
    },
    /// Generate, simulate, fit and analyze, then write report.md.
    Report,
}

fn parse_conditions(names: &[String]) -> Result<Vec<Condition>, CliError> {
    if names.len() == 1 && names[0].eq_ignore_ascii_case("all") {
        return Ok(Condition::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| {
            n.parse::<Condition>()
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect()
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if let Some(c) = &g.conditions {
        cfg.conditions = parse_conditions(c)?;
    }
    if let Some(d) = g.dyads {
        cfg.dyads = d;
    }
    if let Some(w) = g.window {
        cfg.window = w;
    }
    if let Some(l) = g.lambda {
        cfg.lambda = l;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.global)?;
    match cli.command {
        Command::Generate { count } => commands::generate(&cfg, count.unwrap_or(cfg.board_count)),
        Command::Simulate => commands::simulate(&cfg).map(drop),
        Command::Fit { logs, dataset } => {
            commands::fit(&cfg, logs.as_deref(), dataset.as_deref()).map(drop)
        }
        Command::Analyze { summary, corpus } => {
            commands::analyze(&cfg, summary.as_deref(), corpus.as_deref()).map(drop)
        }
        Command::Report => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("teachsim: {e}");
            e.exit_code()
        }
    }
}
