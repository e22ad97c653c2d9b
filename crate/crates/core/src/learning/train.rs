//! Online estimation of the human's score while planning with the estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Sample, ScoreModel, DEFAULT_HIDDEN, Init};
use super::replay::{ReplayDataset, Transition, DEFAULT_CAPACITY};
use crate::belief::{FactoredBelief, Fluent, Weights};
use crate::domains::Domain;
use crate::error::{Error, Result};
use crate::planning::{execute_with_replanning, ExecutionHooks, PlannerConfig};
use crate::scoring::{FKind, Receipt, ScoreSource, SimulatedHuman};

/// Swap the human's preferences before a given episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceChange {
    pub episode: usize,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub f_kind: Option<FKind>,
    /// Exploration rate to restart the decay from.
    pub epsilon_reset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Step-size backoff never goes below this.
    pub min_learning_rate: f64,
    pub l2_scale: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub hidden: Vec<usize>,
    pub init: Init,
    pub epsilon_start: f64,
    /// Episodes over which epsilon falls by a factor of 100.
    pub epsilon_decay_episodes: f64,
    pub episodes: usize,
    /// Gradient steps after each stored transmission.
    pub train_steps_per_transmission: usize,
    /// Append a "something was transmitted" input.
    pub transmit_feature: bool,
    /// Append a "transmitted last step" input.
    pub history_feature: bool,
    pub preference_change: Option<PreferenceChange>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            min_learning_rate: 1e-3,
            l2_scale: 1e-7,
            batch_size: 100,
            replay_capacity: DEFAULT_CAPACITY,
            hidden: DEFAULT_HIDDEN.to_vec(),
            init: Init::default(),
            epsilon_start: 1.0,
            epsilon_decay_episodes: 20.0,
            episodes: 40,
            train_steps_per_transmission: 1,
            transmit_feature: true,
            history_feature: false,
            preference_change: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.learning_rate,
            self.min_learning_rate,
            self.l2_scale,
            self.epsilon_decay_episodes,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.batch_size == 0
            || self.replay_capacity == 0
            || self.train_steps_per_transmission == 0 {
            return Err(Error::Config("training parameters must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) {
            return Err(Error::Config("epsilon_start must be in [0, 1]".into()));
        }
        if let Some(pc) = &self.preference_change {
            if !(0.0..=1.0).contains(&pc.epsilon_reset) {
                return Err(Error::Config("epsilon_reset must be in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// `start * exp(-e ln 100 / decay)`: reaches `start / 100` after `decay`
/// episodes.
pub fn epsilon_schedule(episodes_since_reset: usize, start: f64, decay: f64) -> f64 {
    start * (-(episodes_since_reset as f64) * 100f64.ln() / decay).exp()
}

/// With probability `epsilon` a uniform draw from `info_space`, otherwise
/// `planned`. Always consumes one uniform from `rng`.
pub fn epsilon_greedy_info(planned: Fluent, info_space: &[Fluent], epsilon: f64, rng: &mut ChaCha8Rng) -> Fluent {
    let u: f64 = rng.random();
    if u < epsilon && !info_space.is_empty() {
        info_space[rng.random_range(0..info_space.len())]
    } else {
        planned
    }
}

/// One gradient step on `batch`. The step starts at `lr` and is halved (down
/// to `min_lr`) while it would increase the batch loss. Returns the loss
/// before the step and the step size taken.
pub fn train_step(model: &mut ScoreModel, batch: &[Sample], l2: f64, lr: f64, min_lr: f64) -> Result<(f64, f64)> {
    let (loss, grad) = model.loss_and_gradient(batch, l2)?;
    let mut lr = lr;
    loop {
        let mut candidate = model.clone();
        candidate.descend(&grad, lr)?;
        if candidate.loss(batch, l2)? <= loss || lr <= min_lr {
            *model = candidate;
            return Ok((loss, lr));
        }
        lr = (lr / 2.0).max(min_lr);
    }
}

/// Execution hooks that explore, store transitions and train online.
pub struct Learner {
    model: ScoreModel,
    cfg: TrainConfig,
    replay: ReplayDataset,
    rng: ChaCha8Rng,
    epsilon: f64,
    loss_sum: f64,
    loss_count: usize,
}

impl Learner {
    pub fn new(input_dim: usize, cfg: TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let dim = input_dim + usize::from(cfg.transmit_feature) + usize::from(cfg.history_feature);
        let model = ScoreModel::new(dim, &cfg.hidden, cfg.init, seed)?
            .with_transmit_feature(cfg.transmit_feature)
            .with_history_feature(cfg.history_feature);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Ok(Self {
            model,
            replay: ReplayDataset::new(cfg.replay_capacity),
            epsilon: cfg.epsilon_start,
            cfg,
            rng,
            loss_sum: 0.0,
            loss_count: 0,
        })
    }

    pub fn model(&self) -> &ScoreModel {
        &self.model
    }

    pub fn replay(&self) -> &ReplayDataset {
        &self.replay
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
    }

    /// Mean training loss since the last call.
    pub fn take_mean_loss(&mut self) -> f64 {
        let m = if self.loss_count == 0 {
            f64::NAN
        } else {
            self.loss_sum / self.loss_count as f64
        };
        self.loss_sum = 0.0;
        self.loss_count = 0;
        m
    }

    fn train_once(&mut self) -> Result<()> {
        let batch: Vec<Sample> = self
            .replay
            .sample_batch(self.cfg.batch_size, &mut self.rng)
            .into_iter()
            .map(|t| Ok((self.model.features(&t.before, &t.after, t.transmitted, t.prev_transmitted)?, t.noisy_score)))
            .collect::<Result<_>>()?;
        let (loss, _) = train_step(
            &mut self.model,
            &batch,
            self.cfg.l2_scale,
            self.cfg.learning_rate,
            self.cfg.min_learning_rate,
        )?;
        self.loss_sum += loss;
        self.loss_count += 1;
        Ok(())
    }
}

impl ExecutionHooks for Learner {
    fn score_source(&self) -> &dyn ScoreSource {
        &self.model
    }

    fn choose(&mut self, planned: &Fluent, info_space: &[Fluent]) -> Fluent {
        epsilon_greedy_info(*planned, info_space, self.epsilon, &mut self.rng)
    }

    fn record(
        &mut self,
        before: &FactoredBelief,
        after: &FactoredBelief,
        fluent: &Fluent,
        prev_transmitted: bool,
        receipt: &Receipt,
    ) -> Result<()> {
        self.replay.push(Transition {
            before: before.clone(),
            after: after.clone(),
            noisy_score: receipt.noisy,
            transmitted: !fluent.is_null(),
            prev_transmitted,
        });
        for _ in 0..self.cfg.train_steps_per_transmission {
            self.train_once()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub true_score: f64,
    pub noisy_score: f64,
    pub epsilon: f64,
    pub mean_loss: f64,
    pub env_return: f64,
}

pub struct LearningRun {
    pub model: ScoreModel,
    pub curve: Vec<EpisodeRecord>,
}

/// Plans with the current estimate, explores information epsilon-greedily,
/// and trains after every transmission. Episodes draw fresh initial states
/// from `seed`; epsilon decays per episode and restarts on a preference
/// change.
pub fn train_loop<D: Domain>(
    domain: &D,
    human: &mut SimulatedHuman,
    cfg: &TrainConfig,
    planner: &PlannerConfig,
    seed: u64,
) -> Result<LearningRun> {
    let mut learner = Learner::new(domain.human_initial_belief().total_len(), cfg.clone(), seed)?;
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut since_reset = 0usize;
    let mut eps_base = cfg.epsilon_start;
    let mut curve = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        if let Some(pc) = cfg.preference_change.as_ref().filter(|pc| pc.episode == episode) {
            let mut spec = human.spec().clone();
            if let Some(w) = &pc.weights {
                spec.weights = Weights::new(w.clone())?;
            }
            if let Some(k) = pc.f_kind {
                spec.f_kind = k;
            }
            human.set_spec(spec)?;
            since_reset = 0;
            eps_base = pc.epsilon_reset;
        }
        let epsilon = epsilon_schedule(since_reset, eps_base, cfg.epsilon_decay_episodes);
        learner.set_epsilon(epsilon);
        let state = domain.sample_state(&mut env_rng);
        human.reset(domain.human_initial_belief());
        let trace = execute_with_replanning(domain, state, human, planner, &mut learner)?;
        curve.push(EpisodeRecord {
            episode,
            true_score: trace.clean_score,
            noisy_score: trace.noisy_score,
            epsilon,
            mean_loss: learner.take_mean_loss(),
            env_return: trace.env_return,
        });
        since_reset += 1;
    }
    Ok(LearningRun {
        model: learner.model,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_hits_one_percent() {
        assert_eq!(epsilon_schedule(0, 1.0, 20.0), 1.0);
        assert!((epsilon_schedule(20, 1.0, 20.0) - 0.01).abs() < 1e-12);
        assert!((epsilon_schedule(10, 0.5, 20.0) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn greedy_at_zero() {
        let space = [Fluent::Null, Fluent::Holds { factor: crate::belief::FactorId(0), value: 1 }];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(epsilon_greedy_info(space[1], &space, 0.0, &mut rng), space[1]);
        }
    }

    #[test]
    fn backoff_keeps_loss_from_rising() {
        let mut m = ScoreModel::new(2, &[4], Init::Glorot, 3).unwrap();
        let batch: Vec<Sample> = (0..10).map(|i| (vec![i as f64, 1.0], 50.0 * i as f64)).collect();
        let mut prev = f64::INFINITY;
        for _ in 0..20 {
            let (loss, lr) = train_step(&mut m, &batch, 1e-7, 10.0, 1e-3).unwrap();
            assert!(loss <= prev || lr <= 1e-3);
            prev = loss;
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
