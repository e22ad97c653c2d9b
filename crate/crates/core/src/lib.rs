//! Planning for an agent that acts in a partially observed environment while
//! keeping a human teammate informed.

pub mod belief;
pub mod domains;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod learning;
pub mod planning;
pub mod scoring;

pub use belief::{
    jeffrey_update, marginal, CategoricalDist, FactorId, FactoredBelief, Fluent, HumanForwardModel, Information,
    Weights,
};
pub use entropy::{factored_weighted_entropy, weighted_entropy, weighted_gain};
pub use error::{Error, Result};
pub use scoring::{FKind, Receipt, ScoreFunctionSpec, ScoreSource, SimulatedHuman};
