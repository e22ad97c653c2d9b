use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use infoplan::harness::{run_experiment, run_learning_experiment, DomainKind, ExperimentConfig, Mode};
use infoplan::FKind;

/// Run planning or learning experiments and write traces and CSV summaries.
#[derive(Debug, Parser)]
#[command(name = "infoplan", version)]
struct Args {
    /// JSON experiment config. Flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    domain: Option<DomainKind>,
    /// Grid side length, or number of zones.
    #[arg(long)]
    n: Option<usize>,
    /// Number of objects.
    #[arg(long)]
    m: Option<usize>,
    /// Score shaping: id, sq or log.
    #[arg(long)]
    f: Option<FKind>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// plan_known_rh or learn.
    #[arg(long)]
    mode: Option<Mode>,
    /// Learning episodes per seed.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    beam: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(args: &Args) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = args.domain {
        cfg.domain = d;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(f) = args.f {
        cfg.f_kind = f;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(e) = args.episodes {
        cfg.train.episodes = e;
    }
    if let Some(b) = args.beam {
        cfg.beam_width = Some(b);
    }
    if let Some(o) = &args.out {
        cfg.output = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &Args) -> Result<bool> {
    let cfg = build_config(args)?;
    match cfg.mode {
        Mode::PlanKnownRh => {
            let r = run_experiment(&cfg)?;
            let a = &r.aggregate;
            println!(
                "{} n={} m={} f={}: score {:.3} ± {:.3}, infos/step {:.3} ± {:.3}, env reward {:.2}, {} of {} trials failed",
                a.domain, a.n, a.m, a.f, a.score_mean, a.score_std, a.info_rate_mean, a.info_rate_std,
                a.env_reward_mean, a.failed, a.trials
            );
            for s in r.summaries.iter().filter(|s| s.failed()) {
                eprintln!("trial {}: {}", s.trial, s.error.as_deref().unwrap_or_default());
            }
            Ok(r.failed() == 0)
        }
        Mode::Learn => {
            let r = run_learning_experiment(&cfg)?;
            if let Some(last) = r.curve.last() {
                println!(
                    "episode {}: score {:.3} ± {:.3} (known-score planner {:.3}), epsilon {:.4}",
                    last.episode, last.mean_score, last.std_score, last.baseline_score, last.epsilon
                );
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
