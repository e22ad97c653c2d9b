//! Search-and-recover environments.
//!
//! A [`Domain`] bundles the true environment dynamics with the agent's Bayes
//! filter, its maximum-likelihood observation predictor, a branch-free acting
//! policy and the abstraction the human's belief lives in.

use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{FactoredBelief, Fluent};
use crate::error::Result;

pub mod gridworld;
pub mod scenario;
pub mod zones;

pub use gridworld::{Direction, GridAction, GridBelief, GridObservation, GridState, Gridworld, GridworldConfig};
pub use scenario::Scenario;
pub use zones::{Pose, ZoneAction, ZoneBelief, ZoneConfig, ZoneObservation, ZoneState, Zones};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rewards {
    pub move_cost: f64,
    pub detect_cost: f64,
    pub recover_success: f64,
    pub recover_fail: f64,
}

impl Default for Rewards {
    fn default() -> Self {
        Self {
            move_cost: -1.0,
            detect_cost: -5.0,
            recover_success: -20.0,
            recover_fail: -100.0,
        }
    }
}

impl Rewards {
    /// Recovering blind is cheaper in expectation than detecting first only
    /// when the type is at least this likely.
    pub fn confirm_threshold(&self) -> f64 {
        1.0 - self.detect_cost / (self.recover_fail - self.recover_success)
    }
}

#[derive(Clone, Debug)]
pub struct Outcome<S, O> {
    pub state: S,
    pub observation: O,
    pub reward: f64,
}

pub trait Domain {
    type State: Clone + fmt::Debug;
    type Action: Clone + PartialEq + fmt::Debug + fmt::Display;
    type Observation: Clone + PartialEq + fmt::Debug + fmt::Display;
    type Belief: Clone + fmt::Debug;

    fn sample_state(&self, rng: &mut ChaCha8Rng) -> Self::State;

    /// The agent's belief at the start of an episode (pose is observed).
    fn initial_belief(&self, state: &Self::State) -> Self::Belief;

    fn step(&self, state: &Self::State, action: &Self::Action) -> Outcome<Self::State, Self::Observation>;

    /// Bayes-filter posterior after `action` produced `observation`.
    fn update_belief(
        &self,
        belief: &Self::Belief,
        action: &Self::Action,
        observation: &Self::Observation,
    ) -> Result<Self::Belief>;

    /// Maximum-likelihood observation; ties go to the lowest canonical value.
    fn most_likely_observation(&self, belief: &Self::Belief, action: &Self::Action) -> Self::Observation;

    fn reward(&self, action: &Self::Action, observation: &Self::Observation) -> f64;

    fn is_terminal(&self, belief: &Self::Belief) -> bool;

    fn remaining_objects(&self, belief: &Self::Belief) -> usize;

    /// Next action of the acting policy, `None` when terminal or stuck.
    fn acting_policy(&self, belief: &Self::Belief) -> Option<Self::Action>;

    /// The agent's belief mapped into the human's abstraction.
    fn human_view(&self, belief: &Self::Belief) -> FactoredBelief;

    fn human_initial_belief(&self) -> FactoredBelief;

    /// All transmittable fluents, `Null` first.
    fn info_space(&self) -> Vec<Fluent>;

    /// Hard cap on episode length.
    fn step_limit(&self) -> usize;
}

/// Domains small enough to enumerate actions and observation outcomes.
pub trait Enumerable: Domain {
    fn actions(&self, belief: &Self::Belief) -> Vec<Self::Action>;

    /// Outcomes with positive probability under the belief MDP.
    fn observation_distribution(
        &self,
        belief: &Self::Belief,
        action: &Self::Action,
    ) -> Vec<(f64, Self::Observation)>;

    /// Hashable summary of a belief for memoization.
    fn belief_key(&self, belief: &Self::Belief) -> Vec<i64>;
}

/// Standard posterior under the domain's observation model.
pub fn bayes_filter_update<D: Domain>(
    domain: &D,
    belief: &D::Belief,
    action: &D::Action,
    observation: &D::Observation,
) -> Result<D::Belief> {
    domain.update_belief(belief, action, observation)
}
