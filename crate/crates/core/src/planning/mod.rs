//! Joint acting and informing.
//!
//! The environment reward always dominates: the acting plan is fixed first,
//! and information is chosen along the belief trajectory it induces.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::belief::{jeffrey_update, FactoredBelief, Fluent, HumanForwardModel, Information};
use crate::domains::Domain;
use crate::error::{Error, Result};
use crate::scoring::ScoreSource;

pub mod dag;
pub mod exact;
pub mod replan;

pub use dag::{get_successors, longest_weighted_path_dag, DagNode, InfoContext, PathResult, Successor};
pub use exact::{decompose_and_solve_exact, ExactProblem, ExactSolution, ExactSolver};
pub use replan::{execute_with_replanning, EpisodeTrace, ExecutionHooks, KnownScore, StepRecord};

/// Agent belief paired with the human's belief.
#[derive(Clone, Debug)]
pub struct JointState<B> {
    pub agent: B,
    pub human: FactoredBelief,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointAction<A> {
    pub action: A,
    pub info: Information,
}

/// Reward pair compared lexicographically: environment first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LexReward {
    pub env: f64,
    pub human: f64,
}

impl LexReward {
    pub fn new(env: f64, human: f64) -> Self {
        Self { env, human }
    }

    /// Lexicographic comparison where environment values within `tol` tie.
    pub fn cmp_with_tol(&self, other: &Self, tol: f64) -> Ordering {
        if (self.env - other.env).abs() > tol {
            self.env.total_cmp(&other.env)
        } else {
            self.human.total_cmp(&other.human)
        }
    }
}

impl std::ops::Add for LexReward {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.env + rhs.env, self.human + rhs.human)
    }
}

impl PartialOrd for LexReward {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.env.partial_cmp(&other.env)? {
            Ordering::Equal => self.human.partial_cmp(&other.human),
            o => Some(o),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlanStep<D: Domain> {
    pub action: D::Action,
    /// Transmissions sent before the action, one per sub-step.
    pub infos: Vec<Information>,
    pub predicted_observation: D::Observation,
    pub predicted_agent: D::Belief,
    pub predicted_human: FactoredBelief,
}

#[derive(Clone, Debug)]
pub struct JointPlan<D: Domain> {
    pub steps: Vec<PlanStep<D>>,
    /// Predicted human score of the information plan.
    pub info_value: f64,
    pub env_value: f64,
}

impl<D: Domain> JointPlan<D> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl<D: Domain> fmt::Display for JointPlan<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, s) in self.steps.iter().enumerate() {
            let infos: Vec<String> = s.infos.iter().map(|i| i.to_string()).collect();
            writeln!(f, "{t}: {} [{}] -> {}", s.action, infos.join(", "), s.predicted_observation)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    /// Partial paths kept per DAG layer; `None` keeps all.
    pub beam_width: Option<usize>,
    /// Drop transmissions that would not move the human's marginal.
    pub skip_uninformative: bool,
    /// Transmissions per environment step.
    pub infos_per_step: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            beam_width: Some(64),
            skip_uninformative: true,
            infos_per_step: 1,
        }
    }
}

impl PlannerConfig {
    /// No pruning at all; the DAG search is then exact.
    pub fn exhaustive() -> Self {
        Self {
            beam_width: None,
            skip_uninformative: false,
            infos_per_step: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.infos_per_step == 0 {
            return Err(Error::Config("infos_per_step must be at least 1".into()));
        }
        if self.beam_width == Some(0) {
            return Err(Error::Config("beam_width must be positive".into()));
        }
        Ok(())
    }
}

/// The domain with every observation replaced by its most likely value.
pub struct Determinized<'a, D: Domain> {
    domain: &'a D,
}

pub fn determinize<D: Domain>(domain: &D) -> Determinized<'_, D> {
    Determinized { domain }
}

impl<D: Domain> Determinized<'_, D> {
    pub fn domain(&self) -> &D {
        self.domain
    }

    pub fn transition(&self, belief: &D::Belief, action: &D::Action) -> Result<(D::Observation, D::Belief, f64)> {
        let obs = self.domain.most_likely_observation(belief, action);
        let next = self.domain.update_belief(belief, action, &obs)?;
        let reward = self.domain.reward(action, &obs);
        Ok((obs, next, reward))
    }
}

/// Roll the acting policy forward under predicted observations until the
/// episode would end.
pub fn solve_acting<D: Domain>(det: &Determinized<'_, D>, belief: &D::Belief) -> Result<Vec<D::Action>> {
    let d = det.domain();
    let mut b = belief.clone();
    let mut plan = Vec::new();
    while !d.is_terminal(&b) {
        if plan.len() >= d.step_limit() {
            return Err(Error::PlanningFailure(format!(
                "acting plan exceeds {} steps",
                d.step_limit()
            )));
        }
        let a = d
            .acting_policy(&b)
            .ok_or_else(|| Error::PlanningFailure("no applicable action".into()))?;
        b = det.transition(&b, &a)?.1;
        plan.push(a);
    }
    Ok(plan)
}

/// Beliefs `b_0..b_n` visited by `actions`, with the predicted observations
/// and rewards between them.
#[allow(clippy::type_complexity)]
pub fn belief_trajectory<D: Domain>(
    det: &Determinized<'_, D>,
    actions: &[D::Action],
    belief: &D::Belief,
) -> Result<(Vec<D::Belief>, Vec<D::Observation>, Vec<f64>)> {
    let mut beliefs = vec![belief.clone()];
    let mut obs = Vec::with_capacity(actions.len());
    let mut rewards = Vec::with_capacity(actions.len());
    for a in actions {
        let (o, next, r) = det.transition(beliefs.last().expect("non-empty"), a)?;
        beliefs.push(next);
        obs.push(o);
        rewards.push(r);
    }
    Ok((beliefs, obs, rewards))
}

/// Best information plan along a fixed sequence of agent views. Layer `l`
/// belongs to environment step `l / k` and only its first sub-layer drifts.
pub fn plan_information(
    views: &[FactoredBelief],
    human: &FactoredBelief,
    prev_transmitted: bool,
    info_space: &[Fluent],
    forward: &HumanForwardModel,
    score: &dyn ScoreSource,
    cfg: &PlannerConfig,
) -> Result<(Vec<Information>, f64)> {
    cfg.validate()?;
    let k = cfg.infos_per_step;
    let ctx = InfoContext {
        info_space,
        forward,
        score,
        skip_uninformative: cfg.skip_uninformative,
    };
    let with_history = score.uses_history();
    let result = longest_weighted_path_dag(
        DagNode::root(human.clone(), prev_transmitted),
        views.len() * k,
        cfg.beam_width,
        |n: &DagNode| n.key(with_history),
        |n, layer| {
            Ok(get_successors(n, &views[layer / k], layer % k == 0, &ctx)?
                .into_iter()
                .map(|s| (s.node, s.info, s.weight, s.rank))
                .collect())
        },
    )?;
    Ok((result.labels, result.total))
}

/// Determinize, fix the acting plan, then search the information DAG along
/// the predicted trajectory.
pub fn plan<D: Domain>(
    domain: &D,
    agent: &D::Belief,
    human: &FactoredBelief,
    prev_transmitted: bool,
    forward: &HumanForwardModel,
    score: &dyn ScoreSource,
    cfg: &PlannerConfig,
) -> Result<JointPlan<D>> {
    let det = determinize(domain);
    let actions = solve_acting(&det, agent)?;
    let (beliefs, obs, rewards) = belief_trajectory(&det, &actions, agent)?;
    let views: Vec<FactoredBelief> = beliefs[..actions.len()].iter().map(|b| domain.human_view(b)).collect();
    let (infos, info_value) = plan_information(
        &views,
        human,
        prev_transmitted,
        &domain.info_space(),
        forward,
        score,
        cfg,
    )?;
    let k = cfg.infos_per_step;
    let mut h = human.clone();
    let mut steps = Vec::with_capacity(actions.len());
    for (t, ((a, o), b)) in actions.into_iter().zip(obs).zip(beliefs.into_iter().skip(1)).enumerate() {
        let step_infos = infos[t * k..(t + 1) * k].to_vec();
        for (j, info) in step_infos.iter().enumerate() {
            let fwd = if j == 0 { *forward } else { HumanForwardModel::new(0.0)? };
            h = jeffrey_update(&h, info, &fwd)?;
        }
        steps.push(PlanStep {
            action: a,
            infos: step_infos,
            predicted_observation: o,
            predicted_agent: b,
            predicted_human: h.clone(),
        });
    }
    Ok(JointPlan {
        steps,
        info_value,
        env_value: rewards.iter().sum(),
    })
}
