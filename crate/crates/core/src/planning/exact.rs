//! Exact finite-horizon solution of the joint problem on tiny instances.
//!
//! Stage one finds every environment-optimal action at each belief. Stage
//! two maximizes the human's score over joint states using only those
//! actions.

use std::collections::HashMap;

use crate::belief::{jeffrey_update, BeliefKey, FactoredBelief, Fluent, HumanForwardModel, Information};
use crate::domains::Enumerable;
use crate::error::{Error, Result};
use crate::scoring::ScoreSource;

/// Environment values this close count as tied.
pub const ENV_TIE_TOL: f64 = 1e-9;

/// Upper bound on `(|A| * |I|)^horizon` before refusing.
const MAX_JOINT_BRANCHES: f64 = 5e7;

pub struct ExactProblem<'a, D: Enumerable> {
    pub domain: &'a D,
    pub horizon: usize,
    pub info_space: Vec<Fluent>,
    pub forward: HumanForwardModel,
    pub score: &'a dyn ScoreSource,
    /// Charged per unrecovered object when the horizon runs out.
    pub unfinished_penalty: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution<A> {
    pub env_value: f64,
    pub human_value: f64,
    /// Best first joint action, `None` when already terminal.
    pub first: Option<(A, Fluent)>,
}

type EnvEntry<A> = (f64, Vec<A>);
type HumanKey = (Vec<i64>, BeliefKey, usize, bool);

pub struct ExactSolver<'a, D: Enumerable> {
    problem: ExactProblem<'a, D>,
    env_memo: HashMap<(Vec<i64>, usize), EnvEntry<D::Action>>,
    human_memo: HashMap<HumanKey, (f64, Option<(D::Action, Fluent)>)>,
}

impl<'a, D: Enumerable> ExactSolver<'a, D> {
    pub fn new(problem: ExactProblem<'a, D>, root: &D::Belief) -> Result<Self> {
        let d = problem.domain;
        let branching = (d.actions(root).len() * problem.info_space.len().max(1) * 2) as f64;
        if branching.powi(problem.horizon as i32) > MAX_JOINT_BRANCHES {
            return Err(Error::TooLarge(format!(
                "{} joint branches over horizon {}",
                branching, problem.horizon
            )));
        }
        Ok(Self {
            problem,
            env_memo: HashMap::new(),
            human_memo: HashMap::new(),
        })
    }

    /// Environment value and the set of actions achieving it.
    pub fn env_value(&mut self, b: &D::Belief, h: usize) -> Result<EnvEntry<D::Action>> {
        let d = self.problem.domain;
        let key = (d.belief_key(b), h);
        if let Some(e) = self.env_memo.get(&key) {
            return Ok(e.clone());
        }
        let entry = if d.is_terminal(b) {
            (0.0, Vec::new())
        } else if h == 0 {
            (self.problem.unfinished_penalty * d.remaining_objects(b) as f64, Vec::new())
        } else {
            let mut qs = Vec::new();
            for a in d.actions(b) {
                let mut q = 0.0;
                for (p, o) in d.observation_distribution(b, &a) {
                    let next = d.update_belief(b, &a, &o)?;
                    q += p * (d.reward(&a, &o) + self.env_value(&next, h - 1)?.0);
                }
                qs.push((a, q));
            }
            let best = qs.iter().map(|(_, q)| *q).fold(f64::NEG_INFINITY, f64::max);
            let optimal = qs
                .into_iter()
                .filter(|(_, q)| *q >= best - ENV_TIE_TOL)
                .map(|(a, _)| a)
                .collect();
            (best, optimal)
        };
        self.env_memo.insert(key, entry.clone());
        Ok(entry)
    }

    /// Best expected human score among environment-optimal policies.
    pub fn human_value(
        &mut self,
        b: &D::Belief,
        human: &FactoredBelief,
        h: usize,
        prev_transmitted: bool,
    ) -> Result<(f64, Option<(D::Action, Fluent)>)> {
        let d = self.problem.domain;
        if d.is_terminal(b) || h == 0 {
            return Ok((0.0, None));
        }
        let key = (d.belief_key(b), human.key(), h, prev_transmitted);
        if let Some(e) = self.human_memo.get(&key) {
            return Ok(e.clone());
        }
        let (_, actions) = self.env_value(b, h)?;
        let view = d.human_view(b);
        let space = self.problem.info_space.clone();
        let mut best: (f64, Option<(D::Action, Fluent)>) = (f64::NEG_INFINITY, None);
        for a in &actions {
            let outcomes = d.observation_distribution(b, a);
            for fluent in &space {
                let info = match Information::from_belief(*fluent, &view) {
                    Ok(i) => i,
                    Err(_) => continue,
                };
                let next_h = match jeffrey_update(human, &info, &self.problem.forward) {
                    Ok(n) => n,
                    Err(_) => continue,
                };
                let r = self
                    .problem
                    .score
                    .edge_score(human, &next_h, fluent, prev_transmitted)?;
                let mut q = r;
                for (p, o) in &outcomes {
                    let next_b = d.update_belief(b, a, o)?;
                    q += p * self.human_value(&next_b, &next_h, h - 1, !fluent.is_null())?.0;
                }
                if q > best.0 {
                    best = (q, Some((a.clone(), *fluent)));
                }
            }
        }
        self.human_memo.insert(key, best.clone());
        Ok(best)
    }

    pub fn problem(&self) -> &ExactProblem<'a, D> {
        &self.problem
    }
}

/// Solve the joint problem by the two-stage decomposition.
pub fn decompose_and_solve_exact<D: Enumerable>(
    problem: ExactProblem<'_, D>,
    agent: &D::Belief,
    human: &FactoredBelief,
) -> Result<ExactSolution<D::Action>> {
    let horizon = problem.horizon;
    let mut solver = ExactSolver::new(problem, agent)?;
    let (env_value, _) = solver.env_value(agent, horizon)?;
    let (human_value, first) = solver.human_value(agent, human, horizon, false)?;
    Ok(ExactSolution {
        env_value,
        human_value,
        first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::Weights;
    use crate::domains::{Domain, GridAction, Gridworld, GridworldConfig};
    use crate::scoring::{FKind, ScoreFunctionSpec};

    fn tiny() -> Gridworld {
        Gridworld::new(GridworldConfig {
            num_types: 2,
            ..GridworldConfig::new(1, 1)
        })
        .unwrap()
    }

    #[test]
    fn single_cell_prefers_informed_recovery() {
        let g = tiny();
        let s = g.state_from(0, &[(0, 0)]).unwrap();
        let b = g.initial_belief(&s);
        let spec = ScoreFunctionSpec::new(FKind::Identity, Weights::ones(3));
        let problem = ExactProblem {
            domain: &g,
            horizon: 3,
            info_space: g.info_space(),
            forward: HumanForwardModel::default(),
            score: &spec,
            unfinished_penalty: -200.0,
        };
        let sol = decompose_and_solve_exact(problem, &b, &g.human_initial_belief()).unwrap();
        assert!(sol.env_value < 0.0);
        let (a, _) = sol.first.unwrap();
        assert!(!matches!(a, GridAction::Move(_)));
    }

    #[test]
    fn refuses_large_instances() {
        let g = Gridworld::new(GridworldConfig::new(4, 2)).unwrap();
        let s = g.sample_state(&mut rand::SeedableRng::seed_from_u64(0));
        let b = g.initial_belief(&s);
        let spec = ScoreFunctionSpec::new(FKind::Identity, Weights::ones(5 * 16));
        let problem = ExactProblem {
            domain: &g,
            horizon: 8,
            info_space: g.info_space(),
            forward: HumanForwardModel::default(),
            score: &spec,
            unfinished_penalty: -200.0,
        };
        assert!(matches!(
            decompose_and_solve_exact(problem, &b, &g.human_initial_belief()),
            Err(Error::TooLarge(_))
        ));
    }
}
