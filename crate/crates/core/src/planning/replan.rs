//! Executing a joint plan against the true environment, replanning whenever
//! an observation departs from the prediction.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{plan, JointPlan, PlannerConfig};
use crate::belief::{FactoredBelief, Fluent, Information};
use crate::domains::Domain;
use crate::error::{Error, Result};
use crate::scoring::{Receipt, ScoreSource, SimulatedHuman};

/// One line of an episode trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub action: String,
    pub observation: String,
    pub info: Vec<String>,
    pub marginal: Vec<Option<f64>>,
    pub clean_score: f64,
    pub noisy_score: f64,
    pub env_reward: f64,
    /// Set when this step's outcome forced a new plan.
    pub replanned: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<StepRecord>,
    pub replans: usize,
    pub plan_seconds: f64,
    pub env_return: f64,
    pub clean_score: f64,
    pub noisy_score: f64,
    /// Non-`Null` transmissions per environment step.
    pub info_rate: f64,
}

/// Lets a caller steer which information is sent and see what came back.
pub trait ExecutionHooks {
    /// Score the planner maximizes.
    fn score_source(&self) -> &dyn ScoreSource;

    /// The fluent actually transmitted in place of `planned`.
    fn choose(&mut self, planned: &Fluent, _info_space: &[Fluent]) -> Fluent {
        *planned
    }

    fn record(
        &mut self,
        _before: &FactoredBelief,
        _after: &FactoredBelief,
        _fluent: &Fluent,
        _prev_transmitted: bool,
        _receipt: &Receipt,
    ) -> Result<()> {
        Ok(())
    }
}

/// Plans with a fixed, known score and sends exactly what was planned.
pub struct KnownScore<'a>(pub &'a dyn ScoreSource);

impl ExecutionHooks for KnownScore<'_> {
    fn score_source(&self) -> &dyn ScoreSource {
        self.0
    }
}

pub fn execute_with_replanning<D: Domain>(
    domain: &D,
    state: D::State,
    human: &mut SimulatedHuman,
    cfg: &PlannerConfig,
    hooks: &mut dyn ExecutionHooks,
) -> Result<EpisodeTrace> {
    let info_space = domain.info_space();
    let k = cfg.infos_per_step;
    let mut state = state;
    let mut belief = domain.initial_belief(&state);
    let mut trace = EpisodeTrace::default();
    let mut current: Option<(JointPlan<D>, usize)> = None;
    let mut non_null = 0usize;

    while !domain.is_terminal(&belief) {
        let t = trace.steps.len();
        if t >= domain.step_limit() {
            return Err(Error::PlanningFailure(format!(
                "episode exceeded {} steps",
                domain.step_limit()
            )));
        }
        if current.as_ref().is_none_or(|(p, i)| *i >= p.len()) {
            let start = Instant::now();
            let p = plan(
                domain,
                &belief,
                human.belief(),
                human.last_transmitted(),
                human.forward(),
                hooks.score_source(),
                cfg,
            )?;
            trace.plan_seconds += start.elapsed().as_secs_f64();
            if p.is_empty() {
                return Err(Error::PlanningFailure("empty plan in a non-terminal state".into()));
            }
            current = Some((p, 0));
        }
        let (p, idx) = current.as_mut().expect("plan present");
        let step = &p.steps[*idx];
        *idx += 1;

        let view = domain.human_view(&belief);
        let mut diverged = false;
        let mut record = StepRecord {
            t,
            action: step.action.to_string(),
            observation: String::new(),
            info: Vec::with_capacity(k),
            marginal: Vec::with_capacity(k),
            clean_score: 0.0,
            noisy_score: 0.0,
            env_reward: 0.0,
            replanned: false,
        };
        for (j, planned) in step.infos.iter().enumerate() {
            let chosen = hooks.choose(&planned.fluent, &info_space);
            if chosen != planned.fluent {
                diverged = true;
            }
            let info = Information::from_belief(chosen, &view).unwrap_or(Information::NULL);
            let before = human.belief().clone();
            let prev = human.last_transmitted();
            let (info, receipt) = match human.receive_with(&info, j == 0) {
                Ok(r) => (info, r),
                Err(_) => {
                    diverged = true;
                    (Information::NULL, human.receive_with(&Information::NULL, j == 0)?)
                }
            };
            hooks.record(&before, human.belief(), &info.fluent, prev, &receipt)?;
            if !info.is_null() {
                non_null += 1;
            }
            record.info.push(info.fluent.to_string());
            record.marginal.push(info.marginal);
            record.clean_score += receipt.clean;
            record.noisy_score += receipt.noisy;
        }

        let action = step.action.clone();
        let predicted = step.predicted_observation.clone();
        let outcome = domain.step(&state, &action);
        belief = domain.update_belief(&belief, &action, &outcome.observation)?;
        state = outcome.state;
        record.observation = outcome.observation.to_string();
        record.env_reward = outcome.reward;

        if (outcome.observation != predicted || diverged) && !domain.is_terminal(&belief) {
            record.replanned = true;
            trace.replans += 1;
            current = None;
        }
        trace.env_return += record.env_reward;
        trace.clean_score += record.clean_score;
        trace.noisy_score += record.noisy_score;
        trace.steps.push(record);
    }
    let steps = trace.steps.len();
    trace.info_rate = if steps == 0 { 0.0 } else { non_null as f64 / steps as f64 };
    Ok(trace)
}
