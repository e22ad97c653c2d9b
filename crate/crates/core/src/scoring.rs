//! The human's score function and a simulated, noisy human teammate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::belief::{jeffrey_update, revise, FactoredBelief, Fluent, HumanForwardModel, Information, Weights};
use crate::entropy::weighted_gain;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FKind {
    #[serde(alias = "id")]
    Identity,
    #[serde(alias = "sq")]
    Square,
    Log,
}

impl std::str::FromStr for FKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id" | "identity" => Ok(FKind::Identity),
            "sq" | "square" => Ok(FKind::Square),
            "log" => Ok(FKind::Log),
            other => Err(Error::Config(format!("unknown f kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for FKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FKind::Identity => "id",
            FKind::Square => "sq",
            FKind::Log => "log",
        })
    }
}

/// The human's preferences: weights over belief entries plus the shaping
/// function applied to the weighted gain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreFunctionSpec {
    pub f_kind: FKind,
    pub threshold: f64,
    pub penalty: f64,
    pub null_reward: f64,
    pub weights: Weights,
    /// Extra penalty for transmitting on two consecutive timesteps.
    #[serde(default)]
    pub history_penalty: Option<f64>,
}

impl ScoreFunctionSpec {
    pub const DEFAULT_THRESHOLD: f64 = 1.0;
    pub const DEFAULT_PENALTY: f64 = -10.0;
    pub const DEFAULT_NULL_REWARD: f64 = 1e-3;
    pub const DEFAULT_HISTORY_PENALTY: f64 = -5.0;

    pub fn new(f_kind: FKind, weights: Weights) -> Self {
        Self {
            f_kind,
            threshold: Self::DEFAULT_THRESHOLD,
            penalty: Self::DEFAULT_PENALTY,
            null_reward: Self::DEFAULT_NULL_REWARD,
            weights,
            history_penalty: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0) || (self.f_kind == FKind::Log && self.threshold <= 0.0) {
            return Err(Error::Config(format!("bad threshold {}", self.threshold)));
        }
        if !(self.penalty < 0.0 && self.null_reward >= 0.0) {
            return Err(Error::Config("need penalty < 0 <= null_reward".into()));
        }
        if matches!(self.history_penalty, Some(h) if h > 0.0) {
            return Err(Error::Config("history penalty must be <= 0".into()));
        }
        Ok(())
    }

    pub fn apply_f(&self, gain: f64, is_null: bool) -> f64 {
        if is_null {
            return self.null_reward;
        }
        if gain < self.threshold {
            return self.penalty;
        }
        match self.f_kind {
            FKind::Identity => gain,
            FKind::Square => gain * gain,
            FKind::Log => gain.ln(),
        }
    }

    /// History decorator: penalize a transmission that follows a transmission.
    pub fn history_term(&self, fluent: &Fluent, prev_transmitted: bool) -> f64 {
        match self.history_penalty {
            Some(h) if prev_transmitted && !fluent.is_null() => h,
            _ => 0.0,
        }
    }

    pub fn score(&self, b_h: &FactoredBelief, b_h_next: &FactoredBelief, fluent: &Fluent) -> Result<f64> {
        let gain = weighted_gain(b_h, b_h_next, &self.weights)?;
        Ok(self.apply_f(gain, fluent.is_null()))
    }
}

/// Anything that can weight an edge of the information DAG.
pub trait ScoreSource {
    fn edge_score(
        &self,
        before: &FactoredBelief,
        after: &FactoredBelief,
        fluent: &Fluent,
        prev_transmitted: bool,
    ) -> Result<f64>;

    /// Whether the score is a known function of weighted gain, which lets the
    /// planner evaluate edges incrementally.
    fn as_spec(&self) -> Option<&ScoreFunctionSpec> {
        None
    }

    fn uses_history(&self) -> bool {
        false
    }
}

impl ScoreSource for ScoreFunctionSpec {
    fn edge_score(
        &self,
        before: &FactoredBelief,
        after: &FactoredBelief,
        fluent: &Fluent,
        prev_transmitted: bool,
    ) -> Result<f64> {
        Ok(self.score(before, after, fluent)? + self.history_term(fluent, prev_transmitted))
    }

    fn as_spec(&self) -> Option<&ScoreFunctionSpec> {
        Some(self)
    }

    fn uses_history(&self) -> bool {
        self.history_penalty.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Receipt {
    pub clean: f64,
    pub noisy: f64,
}

/// A simulated teammate holding `B_H`, updated by Jeffrey's rule on every
/// transmission and returning a noisy score.
#[derive(Clone, Debug)]
pub struct SimulatedHuman {
    belief: FactoredBelief,
    forward: HumanForwardModel,
    spec: ScoreFunctionSpec,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    last_transmitted: bool,
}

impl SimulatedHuman {
    pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;

    pub fn new(
        initial: FactoredBelief,
        forward: HumanForwardModel,
        spec: ScoreFunctionSpec,
        noise_sigma: f64,
        rng_seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        if spec.weights.len() != initial.total_len() {
            return Err(Error::DimensionMismatch {
                expected: initial.total_len(),
                actual: spec.weights.len(),
            });
        }
        let noise = if noise_sigma > 0.0 {
            Some(Normal::new(0.0, noise_sigma).map_err(|e| Error::Config(e.to_string()))?)
        } else if noise_sigma == 0.0 {
            None
        } else {
            return Err(Error::Config(format!("noise sigma {noise_sigma} < 0")));
        };
        Ok(Self {
            belief: initial,
            forward,
            spec,
            noise,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            last_transmitted: false,
        })
    }

    pub fn belief(&self) -> &FactoredBelief {
        &self.belief
    }

    pub fn spec(&self) -> &ScoreFunctionSpec {
        &self.spec
    }

    pub fn forward(&self) -> &HumanForwardModel {
        &self.forward
    }

    pub fn last_transmitted(&self) -> bool {
        self.last_transmitted
    }

    /// Starts a new episode with a fresh belief.
    pub fn reset(&mut self, initial: FactoredBelief) {
        self.belief = initial;
        self.last_transmitted = false;
    }

    /// Changes the human's preferences mid-run.
    pub fn set_spec(&mut self, spec: ScoreFunctionSpec) -> Result<()> {
        spec.validate()?;
        self.spec = spec;
        Ok(())
    }

    /// One timestep: drift, Jeffrey update, score.
    pub fn receive(&mut self, info: &Information) -> Result<Receipt> {
        self.receive_with(info, true)
    }

    /// Receives `info`, drifting first only if `drift` is set (extra
    /// transmissions within one timestep do not drift again).
    pub fn receive_with(&mut self, info: &Information, drift: bool) -> Result<Receipt> {
        let next = if drift {
            jeffrey_update(&self.belief, info, &self.forward)?
        } else {
            revise(&self.belief, info)?
        };
        let clean = self.spec.score(&self.belief, &next, &info.fluent)?
            + self.spec.history_term(&info.fluent, self.last_transmitted);
        let noisy = match &self.noise {
            Some(n) => clean + n.sample(&mut self.rng),
            None => clean,
        };
        self.belief = next;
        self.last_transmitted = !info.is_null();
        Ok(Receipt { clean, noisy })
    }
}
