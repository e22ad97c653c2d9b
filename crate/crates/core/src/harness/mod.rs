//! Batch experiments: many trials of one configuration, written to disk as
//! per-trial JSONL traces plus CSV summaries.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{FactoredBelief, HumanForwardModel, Weights};
use crate::domains::{Domain, Gridworld, GridworldConfig, Scenario, ZoneConfig, Zones};
use crate::error::{Error, Result};
use crate::learning::{train_loop, TrainConfig};
use crate::planning::{execute_with_replanning, KnownScore, PlannerConfig, StepRecord};
use crate::scoring::{FKind, ScoreFunctionSpec, SimulatedHuman};

/// Per-value weights used when none are configured. Values past the end get
/// 1; factors shorter than the pattern take its prefix.
pub const DEFAULT_WEIGHT_PATTERN: [f64; 4] = [10.0, 5.0, 1.0, 1.0];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    #[default]
    Grid,
    Zones,
}

impl FromStr for DomainKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" | "gridworld" => Ok(Self::Grid),
            "zones" => Ok(Self::Zones),
            _ => Err(Error::Config(format!("unknown domain {s:?}"))),
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Grid => "grid",
            Self::Zones => "zones",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Plan against the human's true score.
    #[default]
    PlanKnownRh,
    /// Learn the score online.
    Learn,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plan_known_rh" => Ok(Self::PlanKnownRh),
            "learn" => Ok(Self::Learn),
            _ => Err(Error::Config(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub domain: DomainKind,
    /// Grid side length, or number of zones.
    pub n: usize,
    /// Number of objects.
    pub m: usize,
    pub f_kind: FKind,
    /// Either one weight per value (shared by every factor, padded with 1)
    /// or one per belief entry.
    pub weights: Option<Vec<f64>>,
    pub threshold: f64,
    pub drift_epsilon: f64,
    pub noise_sigma: f64,
    /// Trials in `plan_known_rh` mode, seeds in `learn` mode.
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    pub beam_width: Option<usize>,
    /// Defaults to 1 for the grid and 2 for zones.
    pub infos_per_step: Option<usize>,
    pub skip_uninformative: bool,
    /// Score added when transmitting on two consecutive steps.
    pub history_penalty: Option<f64>,
    pub train: TrainConfig,
    /// Fixed initial layout instead of random draws.
    pub scenario: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: DomainKind::Grid,
            n: 4,
            m: 1,
            f_kind: FKind::Identity,
            weights: None,
            threshold: ScoreFunctionSpec::DEFAULT_THRESHOLD,
            drift_epsilon: HumanForwardModel::default().drift_epsilon,
            noise_sigma: SimulatedHuman::DEFAULT_NOISE_SIGMA,
            trials: 100,
            seed: 0,
            mode: Mode::PlanKnownRh,
            beam_width: PlannerConfig::default().beam_width,
            infos_per_step: None,
            skip_uninformative: true,
            history_penalty: None,
            train: TrainConfig::default(),
            scenario: None,
            output: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Config("n and m must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        HumanForwardModel::new(self.drift_epsilon)?;
        self.planner().validate()?;
        if self.mode == Mode::Learn {
            self.train.validate()?;
        }
        Ok(())
    }

    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            beam_width: self.beam_width,
            skip_uninformative: self.skip_uninformative,
            infos_per_step: self.infos_per_step.unwrap_or(match self.domain {
                DomainKind::Grid => 1,
                DomainKind::Zones => 2,
            }),
        }
    }

    /// Expand the configured weights against the human's belief layout.
    pub fn weights_for(&self, layout: &FactoredBelief) -> Result<Weights> {
        let total = layout.total_len();
        let pattern = self.weights.as_deref().unwrap_or(&DEFAULT_WEIGHT_PATTERN);
        if pattern.len() == total && self.weights.is_some() {
            return Weights::new(pattern.to_vec());
        }
        let mut w = Vec::with_capacity(total);
        for (_, d) in layout.factors() {
            if self.weights.is_some() && pattern.len() > d.len() {
                return Err(Error::DimensionMismatch {
                    expected: d.len(),
                    actual: pattern.len(),
                });
            }
            w.extend((0..d.len()).map(|v| pattern.get(v).copied().unwrap_or(1.0)));
        }
        Weights::new(w)
    }

    pub fn score_spec(&self, layout: &FactoredBelief) -> Result<ScoreFunctionSpec> {
        let mut spec = ScoreFunctionSpec::new(self.f_kind, self.weights_for(layout)?);
        spec.threshold = self.threshold;
        spec.history_penalty = self.history_penalty;
        spec.validate()?;
        Ok(spec)
    }

    fn trace_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.output)?;
        Ok(&self.output)
    }
}

/// The RNG for trial `index`: one ChaCha stream per trial off a shared key.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    /// Total true score the human assigned.
    pub score: f64,
    pub noisy_score: f64,
    pub info_rate: f64,
    pub env_reward: f64,
    pub plan_seconds: f64,
    pub replans: usize,
    pub steps: usize,
    pub error: Option<String>,
}

impl TrialSummary {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// A line of `trace_<trial>.jsonl`: every step, then one summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceLine {
    Step(StepRecord),
    Summary(TrialSummary),
}

pub fn trace_path(dir: &Path, trial: usize) -> PathBuf {
    dir.join(format!("trace_{trial}.jsonl"))
}

fn write_trace(path: &Path, steps: &[StepRecord], summary: &TrialSummary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in steps {
        serde_json::to_writer(&mut w, &TraceLine::Step(s.clone()))?;
        w.write_all(b"\n")?;
    }
    serde_json::to_writer(&mut w, &TraceLine::Summary(summary.clone()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// The summary line of a trace file.
pub fn read_trace_summary(path: &Path) -> Result<TrialSummary> {
    let mut last = None;
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let TraceLine::Summary(s) = serde_json::from_str(&line)? {
            last = Some(s);
        }
    }
    last.ok_or_else(|| Error::Io(format!("{} has no summary line", path.display())))
}

/// Sample mean and standard deviation (n - 1 denominator).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub domain: String,
    pub n: usize,
    pub m: usize,
    pub f: String,
    pub trials: usize,
    pub failed: usize,
    pub score_mean: f64,
    pub score_std: f64,
    pub info_rate_mean: f64,
    pub info_rate_std: f64,
    pub env_reward_mean: f64,
    pub env_reward_std: f64,
    pub runtime_mean: f64,
    pub runtime_std: f64,
    pub replans_mean: f64,
    pub replans_std: f64,
}

/// Statistics over the successful trials.
pub fn aggregate(cfg: &ExperimentConfig, summaries: &[TrialSummary]) -> AggregateRow {
    let ok: Vec<&TrialSummary> = summaries.iter().filter(|s| !s.failed()).collect();
    let stat = |f: &dyn Fn(&TrialSummary) -> f64| mean_std(&ok.iter().map(|s| f(s)).collect::<Vec<_>>());
    let (score_mean, score_std) = stat(&|s| s.score);
    let (info_rate_mean, info_rate_std) = stat(&|s| s.info_rate);
    let (env_reward_mean, env_reward_std) = stat(&|s| s.env_reward);
    let (runtime_mean, runtime_std) = stat(&|s| s.plan_seconds);
    let (replans_mean, replans_std) = stat(&|s| s.replans as f64);
    AggregateRow {
        domain: cfg.domain.to_string(),
        n: cfg.n,
        m: cfg.m,
        f: cfg.f_kind.to_string(),
        trials: summaries.len(),
        failed: summaries.len() - ok.len(),
        score_mean,
        score_std,
        info_rate_mean,
        info_rate_std,
        env_reward_mean,
        env_reward_std,
        runtime_mean,
        runtime_std,
        replans_mean,
        replans_std,
    }
}

/// Recompute the aggregate from the trace files alone.
pub fn aggregate_from_traces(cfg: &ExperimentConfig, dir: &Path) -> Result<AggregateRow> {
    let summaries = (0..cfg.trials)
        .map(|t| read_trace_summary(&trace_path(dir, t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(cfg, &summaries))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub struct ExperimentResult {
    pub summaries: Vec<TrialSummary>,
    pub aggregate: AggregateRow,
}

impl ExperimentResult {
    pub fn failed(&self) -> usize {
        self.aggregate.failed
    }
}

fn run_trial<D: Domain>(
    domain: &D,
    fixed: Option<&D::State>,
    cfg: &ExperimentConfig,
    trial: usize,
) -> (Vec<StepRecord>, TrialSummary) {
    let mut summary = TrialSummary {
        trial,
        score: 0.0,
        noisy_score: 0.0,
        info_rate: 0.0,
        env_reward: 0.0,
        plan_seconds: 0.0,
        replans: 0,
        steps: 0,
        error: None,
    };
    let result = (|| {
        let mut rng = trial_rng(cfg.seed, trial);
        let state = match fixed {
            Some(s) => s.clone(),
            None => domain.sample_state(&mut rng),
        };
        let layout = domain.human_initial_belief();
        let spec = cfg.score_spec(&layout)?;
        let forward = HumanForwardModel::new(cfg.drift_epsilon)?;
        let mut human = SimulatedHuman::new(layout, forward, spec.clone(), cfg.noise_sigma, rng.random())?;
        execute_with_replanning(domain, state, &mut human, &cfg.planner(), &mut KnownScore(&spec))
    })();
    match result {
        Ok(trace) => {
            summary.score = trace.clean_score;
            summary.noisy_score = trace.noisy_score;
            summary.info_rate = trace.info_rate;
            summary.env_reward = trace.env_return;
            summary.plan_seconds = trace.plan_seconds;
            summary.replans = trace.replans;
            summary.steps = trace.steps.len();
            (trace.steps, summary)
        }
        Err(e) => {
            summary.error = Some(e.to_string());
            (Vec::new(), summary)
        }
    }
}

fn run_trials<D: Domain + Sync>(domain: &D, fixed: Option<D::State>, cfg: &ExperimentConfig) -> Result<ExperimentResult>
where
    D::State: Sync,
{
    let dir = cfg.trace_dir()?;
    let summaries = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let (steps, summary) = run_trial(domain, fixed.as_ref(), cfg, t);
            write_trace(&trace_path(dir, t), &steps, &summary)?;
            Ok(summary)
        })
        .collect::<Result<Vec<_>>>()?;
    let row = aggregate(cfg, &summaries);
    write_csv(&dir.join("aggregate.csv"), std::slice::from_ref(&row))?;
    Ok(ExperimentResult {
        summaries,
        aggregate: row,
    })
}

fn load_scenario(cfg: &ExperimentConfig) -> Result<Option<Scenario>> {
    cfg.scenario.as_deref().map(Scenario::load).transpose()
}

pub fn build_grid(cfg: &ExperimentConfig) -> Result<Gridworld> {
    Gridworld::new(GridworldConfig::new(cfg.n, cfg.m))
}

pub fn build_zones(cfg: &ExperimentConfig) -> Result<Zones> {
    Zones::new(ZoneConfig::new(cfg.n, cfg.m))
}

/// Run every trial with the known score. Failed trials are reported in the
/// result rather than aborting the batch.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let scenario = load_scenario(cfg)?;
    match cfg.domain {
        DomainKind::Grid => {
            let g = build_grid(cfg)?;
            let fixed = scenario.map(|s| s.grid_state(&g)).transpose()?;
            run_trials(&g, fixed, cfg)
        }
        DomainKind::Zones => {
            let z = build_zones(cfg)?;
            let fixed = scenario.map(|s| s.zone_state(&z)).transpose()?;
            run_trials(&z, fixed, cfg)
        }
    }
}

/// One seed's learning curve row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedCurveRow {
    pub episode: usize,
    /// Sum of true scores over the episode.
    pub cumulative_true_score: f64,
    pub cumulative_noisy_score: f64,
    pub epsilon: f64,
    pub mean_loss: f64,
}

/// Across-seed learning curve row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    pub mean_score: f64,
    pub std_score: f64,
    pub epsilon: f64,
    pub mean_noisy_score: f64,
    pub std_noisy_score: f64,
    pub mean_loss: f64,
    /// Same episodes planned with the true score.
    pub baseline_score: f64,
}

pub struct LearningResult {
    /// `per_seed[k][e]` for seed `k`, episode `e`.
    pub per_seed: Vec<Vec<SeedCurveRow>>,
    /// `baseline[k][e]`: the true-score planner on the same episodes.
    pub baseline: Vec<Vec<f64>>,
    pub curve: Vec<CurveRow>,
}

fn learning_human(layout: FactoredBelief, cfg: &ExperimentConfig, seed: u64) -> Result<SimulatedHuman> {
    let spec = cfg.score_spec(&layout)?;
    SimulatedHuman::new(layout, HumanForwardModel::new(cfg.drift_epsilon)?, spec, cfg.noise_sigma, seed)
}

/// True scores of the known-score planner on the episode sequence that
/// `train_loop` draws from `seed`, with the same preference schedule.
pub fn known_score_baseline<D: Domain>(
    domain: &D,
    cfg: &ExperimentConfig,
    seed: u64,
    episodes: usize,
) -> Result<Vec<f64>> {
    let mut human = learning_human(domain.human_initial_belief(), cfg, seed)?;
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    let planner = cfg.planner();
    let mut out = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        if let Some(pc) = cfg.train.preference_change.as_ref().filter(|pc| pc.episode == episode) {
            let mut spec = human.spec().clone();
            if let Some(w) = &pc.weights {
                spec.weights = Weights::new(w.clone())?;
            }
            if let Some(k) = pc.f_kind {
                spec.f_kind = k;
            }
            human.set_spec(spec)?;
        }
        let state = domain.sample_state(&mut env_rng);
        human.reset(domain.human_initial_belief());
        let spec = human.spec().clone();
        out.push(execute_with_replanning(domain, state, &mut human, &planner, &mut KnownScore(&spec))?.clean_score);
    }
    Ok(out)
}

fn learn_seeds<D: Domain + Sync>(domain: &D, cfg: &ExperimentConfig) -> Result<LearningResult> {
    let episodes = cfg.train.episodes;
    let runs = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let seed: u64 = trial_rng(cfg.seed, k).random();
            let mut human = learning_human(domain.human_initial_belief(), cfg, seed)?;
            let run = train_loop(domain, &mut human, &cfg.train, &cfg.planner(), seed)?;
            let rows: Vec<SeedCurveRow> = run
                .curve
                .iter()
                .map(|r| SeedCurveRow {
                    episode: r.episode,
                    cumulative_true_score: r.true_score,
                    cumulative_noisy_score: r.noisy_score,
                    epsilon: r.epsilon,
                    mean_loss: r.mean_loss,
                })
                .collect();
            let baseline = known_score_baseline(domain, cfg, seed, episodes)?;
            Ok((rows, baseline))
        })
        .collect::<Result<Vec<_>>>()?;
    let (per_seed, baseline): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let curve = (0..episodes)
        .map(|e| {
            let true_scores: Vec<f64> = per_seed.iter().map(|r: &Vec<SeedCurveRow>| r[e].cumulative_true_score).collect();
            let noisy: Vec<f64> = per_seed.iter().map(|r| r[e].cumulative_noisy_score).collect();
            let losses: Vec<f64> = per_seed.iter().map(|r| r[e].mean_loss).filter(|l| l.is_finite()).collect();
            let base: Vec<f64> = baseline.iter().map(|b: &Vec<f64>| b[e]).collect();
            let (mean_score, std_score) = mean_std(&true_scores);
            let (mean_noisy_score, std_noisy_score) = mean_std(&noisy);
            CurveRow {
                episode: e,
                mean_score,
                std_score,
                epsilon: per_seed[0][e].epsilon,
                mean_noisy_score,
                std_noisy_score,
                mean_loss: mean_std(&losses).0,
                baseline_score: mean_std(&base).0,
            }
        })
        .collect();
    Ok(LearningResult {
        per_seed,
        baseline,
        curve,
    })
}

/// Learn the score online once per seed (`trials` seeds) and write
/// `curve.csv` plus `curve_seed<k>.csv`.
pub fn run_learning_experiment(cfg: &ExperimentConfig) -> Result<LearningResult> {
    cfg.validate()?;
    if cfg.scenario.is_some() {
        return Err(Error::Config("learning draws its own episodes; drop scenario".into()));
    }
    let result = match cfg.domain {
        DomainKind::Grid => learn_seeds(&build_grid(cfg)?, cfg)?,
        DomainKind::Zones => learn_seeds(&build_zones(cfg)?, cfg)?,
    };
    let dir = cfg.trace_dir()?;
    write_csv(&dir.join("curve.csv"), &result.curve)?;
    for (k, rows) in result.per_seed.iter().enumerate() {
        write_csv(&dir.join(format!("curve_seed{k}.csv")), rows)?;
    }
    Ok(result)
}
