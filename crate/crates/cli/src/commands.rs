use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use teachsim::agents::{
    run_condition_batch, BatchSummary, Communication, Condition, EpisodeLog, TeachingEvent,
    Visibility,
};
use teachsim::analysis::{
    canonical_weights, contrast_code, fit_window_utilities, ols_fit, summarize_corpus,
    t_test_two_sided, CategoryLexicon, CorpusSummary, Factor, RegressionTerm, TTestKind, TermCount,
};
use teachsim::choicemodel::{fit_map, ChoiceDataset, MapEstimate};
use teachsim::env::{
    color_feature, conjunction_feature, feature_name, generate_trial, shape_feature, Color, Shape,
    NUM_FEATURES,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{csv_bytes, ensure_dir, list_files, read_to_string, write_atomic, write_json};

pub fn slug(c: Condition) -> String {
    c.name().to_ascii_lowercase()
}

fn selected_conditions(cfg: &RunConfig) -> Vec<Condition> {
    let mut conds = cfg.conditions.clone();
    conds.sort_by_key(Condition::index);
    conds.dedup();
    conds
}

// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct Manifest {
    seed: u64,
    count: usize,
    config_hash: String,
    files: Vec<String>,
}

pub fn generate(cfg: &RunConfig, count: usize) -> Result<(), CliError> {
    let map = cfg.value_map()?;
    let dir = cfg.output_dir.join("boards");
    ensure_dir(&dir)?;
    let mut files = Vec::with_capacity(count);
    for t in 0..count {
        let board = generate_trial(cfg.seed, t as u32, &map, &cfg.generator)?;
        let name = format!("board-{t:04}.json");
        write_json(&dir.join(&name), &board)?;
        files.push(format!("boards/{name}"));
    }
    let manifest = Manifest {
        seed: cfg.seed,
        count,
        config_hash: cfg.sim_config()?.config_hash(),
        files,
    };
    write_json(&cfg.output_dir.join("manifest.json"), &manifest)?;
    println!(
        "{}",
        serde_json::to_string(&manifest).map_err(|e| CliError::Data(e.to_string()))?
    );
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub condition: Condition,
    pub dyad: usize,
    pub final_score: i32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    pub dyad: usize,
    pub trial: u32,
    pub text: String,
}

pub fn simulate(cfg: &RunConfig) -> Result<Vec<BatchSummary>, CliError> {
    let sim = cfg.sim_config()?;
    let logs_dir = cfg.output_dir.join("logs");
    ensure_dir(&logs_dir)?;
    for stale in list_files(&logs_dir, "jsonl")? {
        std::fs::remove_file(&stale).map_err(|e| CliError::io(&stale, e))?;
    }
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    let mut corpus = String::new();
    for cond in selected_conditions(cfg) {
        let run = run_condition_batch(cond, cfg.dyads, cfg.seed, &sim)?;
        for log in &run.logs {
            let path = logs_dir.join(format!("{}-{:04}.jsonl", slug(cond), log.header.dyad));
            write_atomic(&path, log.to_jsonl()?.as_bytes())?;
            for t in &log.trials {
                if let TeachingEvent::Chat { text, .. } = &t.teaching {
                    let line = CorpusLine {
                        condition: Some(cond),
                        dyad: log.header.dyad,
                        trial: t.trial,
                        text: text.clone(),
                    };
                    corpus.push_str(
                        &serde_json::to_string(&line).map_err(|e| CliError::Data(e.to_string()))?,
                    );
                    corpus.push('\n');
                }
            }
        }
        rows.extend(run.summary.dyads.iter().map(|d| SummaryRow {
            condition: cond,
            dyad: d.dyad,
            final_score: d.final_score,
        }));
        println!(
            "{:<13} n={:<4} mean={:>8.2} sd={:>7.2}",
            cond.name(),
            run.summary.dyads.len(),
            run.summary.mean,
            run.summary.sd
        );
        summaries.push(run.summary);
    }
    write_atomic(
        &cfg.output_dir.join("summary.csv"),
        &csv_bytes(None, &rows)?,
    )?;
    write_atomic(&cfg.output_dir.join("corpus.jsonl"), corpus.as_bytes())?;
    write_atomic(
        &cfg.output_dir.join("config.json"),
        cfg.to_json().as_bytes(),
    )?;
    Ok(summaries)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct Fig4Row {
    pub condition: Condition,
    pub n: usize,
    pub pink: f64,
    pub circle: f64,
    pub pink_circle: f64,
}

#[derive(Debug, Serialize)]
struct DatasetFit<'a> {
    #[serde(flatten)]
    estimate: &'a MapEstimate,
    trials: usize,
    lambda: f64,
}

fn fit_dataset(cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    let data = ChoiceDataset::from_jsonl(&read_to_string(path)?, &[])?;
    let est = fit_map(&data, &cfg.prior(), &cfg.optimizer)?;
    write_json(
        &cfg.output_dir.join("fit.json"),
        &DatasetFit {
            estimate: &est,
            trials: data.len(),
            lambda: cfg.lambda,
        },
    )?;
    println!(
        "log_posterior={} converged={}",
        est.log_posterior, est.diagnostics.converged
    );
    Ok(())
}

pub fn fit(
    cfg: &RunConfig,
    logs_dir: Option<&Path>,
    dataset: Option<&Path>,
) -> Result<Vec<Fig4Row>, CliError> {
    if let Some(path) = dataset {
        fit_dataset(cfg, path)?;
        return Ok(Vec::new());
    }
    let logs_dir = logs_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join("logs"));
    let files = list_files(&logs_dir, "jsonl")?;
    if files.is_empty() {
        return Err(CliError::Data(format!(
            "no episode logs in {}",
            logs_dir.display()
        )));
    }
    let mut logs: Vec<EpisodeLog> = Vec::new();
    for path in &files {
        match EpisodeLog::from_jsonl(&read_to_string(path)?) {
            Ok((log, skipped)) => {
                if skipped > 0 {
                    log::warn!("{}: skipped {skipped} corrupt trial lines", path.display());
                }
                if log.trials.len() < cfg.window {
                    log::warn!(
                        "{}: {} usable trials, fewer than the window of {}; skipping",
                        path.display(),
                        log.trials.len(),
                        cfg.window
                    );
                    continue;
                }
                logs.push(log);
            }
            Err(e) => log::warn!("{}: unreadable log ({e}); skipping", path.display()),
        }
    }
    if logs.is_empty() {
        return Err(CliError::Data("every episode log was skipped".into()));
    }
    logs.sort_by_key(|l| (l.header.condition.index(), l.header.dyad));

    let prior = cfg.prior();
    let fits: Vec<MapEstimate> = logs
        .par_iter()
        .map(|l| fit_window_utilities(l, cfg.window, &prior, &cfg.optimizer))
        .collect::<Result<_, _>>()?;

    let mut header: Vec<String> = vec!["condition".into(), "dyad".into(), "counterbalanced".into()];
    header.extend((0..NUM_FEATURES).map(feature_name));
    header.extend(["log_posterior".into(), "converged".into()]);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)
        .map_err(|e| CliError::Data(e.to_string()))?;

    let fits_dir = cfg.output_dir.join("fits");
    ensure_dir(&fits_dir)?;
    let cols = [
        color_feature(Color::Pink),
        shape_feature(Shape::Circle),
        conjunction_feature(Color::Pink, Shape::Circle),
    ];
    let mut agg: BTreeMap<usize, (Condition, usize, [f64; 3])> = BTreeMap::new();
    for (log, est) in logs.iter().zip(&fits) {
        let theta = canonical_weights(log, &est.theta);
        let mut rec = vec![
            log.header.condition.name().to_string(),
            log.header.dyad.to_string(),
            log.header.counterbalanced.to_string(),
        ];
        rec.extend(theta.as_array().iter().map(|v| v.to_string()));
        rec.push(est.log_posterior.to_string());
        rec.push(est.diagnostics.converged.to_string());
        w.write_record(&rec)
            .map_err(|e| CliError::Data(e.to_string()))?;

        let e = agg.entry(log.header.condition.index() as usize).or_insert((
            log.header.condition,
            0,
            [0.0; 3],
        ));
        e.1 += 1;
        for (s, i) in e.2.iter_mut().zip(cols) {
            *s += theta.get(i);
        }
        let name = format!("{}-{:04}.json", slug(log.header.condition), log.header.dyad);
        write_json(&fits_dir.join(name), est)?;
    }
    write_atomic(
        &cfg.output_dir.join("coefficients.csv"),
        &w.into_inner().map_err(|e| CliError::Data(e.to_string()))?,
    )?;

    let rows: Vec<Fig4Row> = agg
        .into_values()
        .map(|(condition, n, s)| Fig4Row {
            condition,
            n,
            pink: s[0] / n as f64,
            circle: s[1] / n as f64,
            pink_circle: s[2] / n as f64,
        })
        .collect();
    write_atomic(
        &cfg.output_dir.join("condition_weights.csv"),
        &csv_bytes(None, &rows)?,
    )?;
    for r in &rows {
        println!(
            "{:<13} n={:<4} pink={:>8.4} circle={:>8.4} pink_circle={:>8.4}",
            r.condition.name(),
            r.n,
            r.pink,
            r.circle,
            r.pink_circle
        );
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ConditionMean {
    pub condition: Condition,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TTestRow {
    pub a: Condition,
    pub b: Condition,
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

#[derive(Debug, Default)]
pub struct Analysis {
    pub means: Vec<ConditionMean>,
    pub regression: Option<Vec<RegressionTerm>>,
    pub ttests: Vec<TTestRow>,
    pub corpus: Vec<(String, CorpusSummary)>,
}

fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, CliError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<SummaryRow>, _>>()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_corpus(path: &Path) -> Result<Vec<CorpusLine>, CliError> {
    let mut out = Vec::new();
    for (i, line) in read_to_string(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(l) => out.push(l),
            Err(e) => log::warn!(
                "{}:{}: skipping corrupt corpus line ({e})",
                path.display(),
                i + 1
            ),
        }
    }
    Ok(out)
}

fn regression(rows: &[SummaryRow]) -> Result<Option<Vec<RegressionTerm>>, CliError> {
    let multi: Vec<&SummaryRow> = rows.iter().filter(|r| !r.condition.is_solo()).collect();
    let present: Vec<Condition> = {
        let mut v: Vec<Condition> = multi.iter().map(|r| r.condition).collect();
        v.sort();
        v.dedup();
        v
    };
    let has = |f: &dyn Fn(&Condition) -> bool| present.iter().any(f);
    let complete = has(&|c| c.communication == Communication::Chat)
        && has(&|c| c.communication == Communication::Demo)
        && has(&|c| c.visibility == Visibility::Full)
        && has(&|c| c.visibility == Visibility::Partial);
    if present.len() < 2 || !complete {
        println!("regression skipped: need both communication and both visibility levels among multiplayer conditions");
        return Ok(None);
    }
    let comm = Factor::new(
        "communication",
        multi
            .iter()
            .map(|r| format!("{:?}", r.condition.communication).to_lowercase())
            .collect(),
        "chat",
    );
    let vis = Factor::new(
        "visibility",
        multi
            .iter()
            .map(|r| format!("{:?}", r.condition.visibility).to_lowercase())
            .collect(),
        "partial",
    );
    let design = contrast_code(&comm, &vis)?;
    let y: Vec<f64> = multi.iter().map(|r| r.final_score as f64).collect();
    match ols_fit(&design, &y) {
        Ok(fit) => Ok(Some(fit.rows())),
        Err(e) => {
            println!("regression skipped: {e}");
            Ok(None)
        }
    }
}

const TTEST_PAIRS: [(Condition, Condition); 5] = [
    (Condition::SOLO_FULL, Condition::SOLO_PARTIAL),
    (Condition::DEMO_FULL, Condition::DEMO_PARTIAL),
    (Condition::CHAT_FULL, Condition::CHAT_PARTIAL),
    (Condition::DEMO_FULL, Condition::CHAT_FULL),
    (Condition::DEMO_PARTIAL, Condition::CHAT_PARTIAL),
];

fn table(rows: &[TermCount], k: usize) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        Some(&["term", "count"]),
        rows.iter().take(k).map(|r| (&r.term, r.count)),
    )
}

fn category_table(s: &CorpusSummary) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        Some(&["category", "proportion"]),
        s.categories.iter().map(|(c, p)| (c.name(), *p)),
    )
}

pub fn analyze(
    cfg: &RunConfig,
    summary: Option<&Path>,
    corpus: Option<&Path>,
) -> Result<Analysis, CliError> {
    let pick = |given: Option<&Path>, default: &str| -> Result<Option<PathBuf>, CliError> {
        match given {
            Some(p) if p.exists() => Ok(Some(p.to_path_buf())),
            Some(p) => Err(CliError::Data(format!("{} does not exist", p.display()))),
            None => {
                let p = cfg.output_dir.join(default);
                Ok(p.exists().then_some(p))
            }
        }
    };
    let summary_path = pick(summary, "summary.csv")?;
    let corpus_path = pick(corpus, "corpus.jsonl")?;
    if summary_path.is_none() && corpus_path.is_none() {
        return Err(CliError::Data(format!(
            "nothing to analyze: no summary.csv or corpus.jsonl in {}",
            cfg.output_dir.display()
        )));
    }
    ensure_dir(&cfg.output_dir)?;
    let mut out = Analysis::default();

    if let Some(path) = summary_path {
        let rows = read_summary(&path)?;
        let mut by_cond: BTreeMap<usize, (Condition, Vec<f64>)> = BTreeMap::new();
        for r in &rows {
            by_cond
                .entry(r.condition.index() as usize)
                .or_insert((r.condition, Vec::new()))
                .1
                .push(r.final_score as f64);
        }
        for (cond, scores) in by_cond.values() {
            let n = scores.len();
            let mean = scores.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            out.means.push(ConditionMean {
                condition: *cond,
                n,
                mean,
                sd,
            });
        }
        write_atomic(
            &cfg.output_dir.join("condition_means.csv"),
            &csv_bytes(None, &out.means)?,
        )?;

        let scores = |c: Condition| {
            by_cond
                .get(&(c.index() as usize))
                .map(|(_, s)| s.as_slice())
        };
        for (a, b) in TTEST_PAIRS {
            if let (Some(sa), Some(sb)) = (scores(a), scores(b)) {
                if sa.len() >= 2 && sb.len() >= 2 {
                    let r = t_test_two_sided(sa, sb, TTestKind::Pooled)?;
                    out.ttests.push(TTestRow {
                        a,
                        b,
                        t: r.t,
                        df: r.df,
                        p: r.p,
                    });
                }
            }
        }
        write_atomic(
            &cfg.output_dir.join("ttests.csv"),
            &csv_bytes(None, &out.ttests)?,
        )?;

        out.regression = regression(&rows)?;
        if let Some(terms) = &out.regression {
            write_json(&cfg.output_dir.join("regression.json"), terms)?;
        }
    }

    if let Some(path) = corpus_path {
        let lines = read_corpus(&path)?;
        let lex = CategoryLexicon::default();
        let text_dir = cfg.output_dir.join("text");
        ensure_dir(&text_dir)?;
        let mut groups: BTreeMap<(usize, String), Vec<&str>> = BTreeMap::new();
        for l in &lines {
            let key = match l.condition {
                Some(c) => (c.index() as usize, slug(c)),
                None => (usize::MAX, "unlabeled".to_string()),
            };
            groups.entry(key).or_default().push(l.text.as_str());
        }
        let all = summarize_corpus(lines.iter().map(|l| l.text.as_str()), &lex);
        write_atomic(
            &text_dir.join("tokens.csv"),
            &table(&all.tokens, cfg.top_k)?,
        )?;
        write_atomic(
            &text_dir.join("bigrams.csv"),
            &table(&all.bigrams, cfg.top_k)?,
        )?;
        write_atomic(&text_dir.join("categories.csv"), &category_table(&all)?)?;
        out.corpus.push(("all".into(), all));
        for ((_, name), texts) in groups {
            let s = summarize_corpus(texts, &lex);
            write_atomic(
                &text_dir.join(format!("tokens-{name}.csv")),
                &table(&s.tokens, cfg.top_k)?,
            )?;
            write_atomic(
                &text_dir.join(format!("bigrams-{name}.csv")),
                &table(&s.bigrams, cfg.top_k)?,
            )?;
            write_atomic(
                &text_dir.join(format!("categories-{name}.csv")),
                &category_table(&s)?,
            )?;
            out.corpus.push((name, s));
        }
    }
    if let Some(terms) = &out.regression {
        for t in terms {
            println!(
                "{:<28} beta={:>9.3} se={:>8.3} t={:>8.3} p={:.4}",
                t.term, t.beta, t.se, t.t, t.p
            );
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------

fn fmt_md_table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut s = format!(
        "| {} |\n|{}\n",
        header.join(" | "),
        "---|".repeat(header.len())
    );
    for r in rows {
        s.push_str(&format!("| {} |\n", r.join(" | ")));
    }
    s
}

pub fn report(cfg: &RunConfig) -> Result<(), CliError> {
    generate(cfg, cfg.board_count)?;
    simulate(cfg)?;
    let condition_weights = fit(cfg, None, None)?;
    let analysis = analyze(cfg, None, None)?;

    let mut md = String::from("# Simulation report\n\n");
    md.push_str(&format!(
        "Seed {}, {} dyads per condition, {} trials per episode, window {}, lambda {}.\n\n",
        cfg.seed, cfg.dyads, cfg.trials, cfg.window, cfg.lambda
    ));
    md.push_str("## Final scores\n\n");
    md.push_str(&fmt_md_table(
        &["condition", "n", "mean", "sd"],
        analysis
            .means
            .iter()
            .map(|m| {
                vec![
                    m.condition.name().into(),
                    m.n.to_string(),
                    format!("{:.2}", m.mean),
                    format!("{:.2}", m.sd),
                ]
            })
            .collect(),
    ));
    md.push_str("\n## Contrast-coded regression (communication: chat = +0.5, visibility: partial = +0.5)\n\n");
    match &analysis.regression {
        Some(terms) => md.push_str(&fmt_md_table(
            &["term", "beta", "se", "t", "p"],
            terms
                .iter()
                .map(|t| {
                    vec![
                        t.term.clone(),
                        format!("{:.3}", t.beta),
                        format!("{:.3}", t.se),
                        format!("{:.3}", t.t),
                        format!("{:.4}", t.p),
                    ]
                })
                .collect(),
        )),
        None => md.push_str("Skipped: the selected conditions do not span both factors.\n"),
    }
    md.push_str("\n## Pairwise t-tests (pooled variance)\n\n");
    md.push_str(&fmt_md_table(
        &["a", "b", "t", "df", "p"],
        analysis
            .ttests
            .iter()
            .map(|r| {
                vec![
                    r.a.name().into(),
                    r.b.name().into(),
                    format!("{:.3}", r.t),
                    format!("{}", r.df),
                    format!("{:.4}", r.p),
                ]
            })
            .collect(),
    ));
    md.push_str(&format!(
        "\n## Mean fitted weights over the last {} trials\n\n",
        cfg.window
    ));
    md.push_str(&fmt_md_table(
        &["condition", "n", "pink", "circle", "pink_circle"],
        condition_weights
            .iter()
            .map(|r| {
                vec![
                    r.condition.name().into(),
                    r.n.to_string(),
                    format!("{:.4}", r.pink),
                    format!("{:.4}", r.circle),
                    format!("{:.4}", r.pink_circle),
                ]
            })
            .collect(),
    ));
    md.push_str("\n## Chat vocabulary\n\n");
    for (name, s) in &analysis.corpus {
        md.push_str(&format!("### {name} ({} tokens)\n\n", s.total_tokens));
        let top = |v: &[TermCount]| {
            v.iter()
                .take(5)
                .map(|t| format!("{} ({})", t.term, t.count))
                .collect::<Vec<_>>()
                .join(", ")
        };
        md.push_str(&format!(
            "Top tokens: {}\n\nTop bigrams: {}\n\n",
            top(&s.tokens),
            top(&s.bigrams)
        ));
        let cats: Vec<String> = s
            .categories
            .iter()
            .map(|(c, p)| format!("{c} {:.1}%", 100.0 * p))
            .collect();
        md.push_str(&format!("Categories: {}\n\n", cats.join(", ")));
    }
    write_atomic(&cfg.output_dir.join("report.md"), md.as_bytes())?;
    println!("wrote {}", cfg.output_dir.join("report.md").display());
    Ok(())
}
