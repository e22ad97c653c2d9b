//! Independent reference solvers shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

use infoplan::belief::{BeliefKey, CategoricalDist, FactoredBelief, Fluent, HumanForwardModel, Information};
use infoplan::domains::{Domain, Enumerable, GridBelief, Gridworld};
use infoplan::belief::Weights;
use infoplan::{jeffrey_update, FKind, ScoreFunctionSpec, ScoreSource};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_dist(rng: &mut ChaCha8Rng, dim: usize, floor: f64) -> CategoricalDist {
    CategoricalDist::from_masses((0..dim).map(|_| floor + rng.random::<f64>()).collect()).unwrap()
}

/// A random shaping, threshold and weight vector, sometimes history-based.
pub fn random_spec(rng: &mut ChaCha8Rng, len: usize) -> ScoreFunctionSpec {
    let f = [FKind::Identity, FKind::Square, FKind::Log][rng.random_range(0..3)];
    let w = Weights::new((0..len).map(|_| rng.random::<f64>() * 12.0).collect()).unwrap();
    let mut spec = ScoreFunctionSpec::new(f, w);
    spec.threshold = [0.1, 0.5, 1.0][rng.random_range(0..3)];
    if rng.random_bool(0.3) {
        spec.history_penalty = Some(-2.0);
    }
    spec
}

/// Best total score over every information sequence along `views`.
pub fn brute_force_info(
    views: &[FactoredBelief],
    human: &FactoredBelief,
    space: &[Fluent],
    fwd: &HumanForwardModel,
    score: &dyn ScoreSource,
) -> f64 {
    fn go(
        t: usize,
        h: &FactoredBelief,
        prev: bool,
        views: &[FactoredBelief],
        space: &[Fluent],
        fwd: &HumanForwardModel,
        score: &dyn ScoreSource,
    ) -> f64 {
        if t == views.len() {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for fl in space {
            let Ok(info) = Information::from_belief(*fl, &views[t]) else { continue };
            let Ok(next) = jeffrey_update(h, &info, fwd) else { continue };
            let r = score.edge_score(h, &next, fl, prev).unwrap();
            best = best.max(r + go(t + 1, &next, !fl.is_null(), views, space, fwd, score));
        }
        best
    }
    go(0, human, false, views, space, fwd, score)
}

/// Joint lexicographic expectimax over (action, information) pairs with no
/// decomposition. Returns (environment value, human value).
pub struct JointOracle<'a> {
    pub g: &'a Gridworld,
    pub space: &'a [Fluent],
    pub fwd: HumanForwardModel,
    pub score: &'a ScoreFunctionSpec,
    pub penalty: f64,
    pub memo: HashMap<(Vec<i64>, BeliefKey, usize, bool), (f64, f64)>,
}

impl<'a> JointOracle<'a> {
    pub fn new(g: &'a Gridworld, space: &'a [Fluent], fwd: HumanForwardModel, score: &'a ScoreFunctionSpec, penalty: f64) -> Self {
        Self {
            g,
            space,
            fwd,
            score,
            penalty,
            memo: HashMap::new(),
        }
    }

    pub fn value(&mut self, b: &GridBelief, human: &FactoredBelief, h: usize, prev: bool) -> (f64, f64) {
        let g = self.g;
        if g.is_terminal(b) {
            return (0.0, 0.0);
        }
        if h == 0 {
            return (self.penalty * g.remaining_objects(b) as f64, 0.0);
        }
        let key = (g.belief_key(b), human.key(), h, prev);
        if let Some(v) = self.memo.get(&key) {
            return *v;
        }
        let view = g.human_view(b);
        let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for a in g.actions(b) {
            let outcomes = g.observation_distribution(b, &a);
            for fluent in self.space {
                let Ok(info) = Information::from_belief(*fluent, &view) else { continue };
                let Ok(next_h) = jeffrey_update(human, &info, &self.fwd) else { continue };
                let mut env = 0.0;
                let mut hum = self.score.edge_score(human, &next_h, fluent, prev).unwrap();
                for (p, o) in &outcomes {
                    let nb = g.update_belief(b, &a, o).unwrap();
                    let (e, v) = self.value(&nb, &next_h, h - 1, !fluent.is_null());
                    env += p * (g.reward(&a, o) + e);
                    hum += p * v;
                }
                if env > best.0 + 1e-9 || ((env - best.0).abs() <= 1e-9 && hum > best.1) {
                    best = (env, hum);
                }
            }
        }
        self.memo.insert(key, best);
        best
    }
}
